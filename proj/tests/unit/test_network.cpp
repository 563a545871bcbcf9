#include <doctest.h>

#include <random>

#include "hybridstab/error.hpp"
#include "hybridstab/network.hpp"
#include "random_cases.hpp"

using namespace hybridstab;

namespace {

BusEntry sg(int id) {
    return {id, make_bus(BusKind::SG_governor, {{"Jw0", 7.4}, {"kg", 20.0}, {"tau", 3.0}, {"gamma", 0.01}}), 0.0};
}

BusEntry hvdc(int id) {
    return {id, make_bus(BusKind::HVDC_dualport, {{"Cdc", 1.0}, {"kw", 1.0}, {"kp", 0.1}}), 0.0};
}

BusEntry passive(int id) {
    return {id, make_bus(BusKind::Passive, {}), 0.0};
}

std::vector<double> sorted_eigenvalues(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const auto& ev = es.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

}  // namespace

TEST_SUITE("network") {
    TEST_CASE("two-bus AC Laplacian") {
        NetworkCase net;
        net.buses = {sg(1), sg(2)};
        net.ac_edges = {{1, 2, 5.0}};
        net.validate();
        const LaplacianSet lap = build_laplacians(net);
        CHECK(lap.L_ac(0, 0) == 5.0);
        CHECK(lap.L_ac(0, 1) == -5.0);
        CHECK(lap.lambda_ac_min == doctest::Approx(10.0));
        CHECK(lap.lambda_ac_max == doctest::Approx(10.0));
        CHECK(lap.subnetworks.empty());
    }

    TEST_CASE("DC path graph spectrum") {
        NetworkCase net;
        net.buses = {hvdc(1), hvdc(2), hvdc(3)};
        net.dc_edges = {{1, 2, 1.0}, {2, 3, 1.0}};
        net.validate();
        const LaplacianSet lap = build_laplacians(net);
        REQUIRE(lap.subnetworks.size() == 1);
        CHECK(lap.subnetworks[0].lambda_min == doctest::Approx(1.0));
        CHECK(lap.lambda_dc_max == doctest::Approx(3.0));
    }

    TEST_CASE("two disjoint DC pairs") {
        NetworkCase net;
        net.buses = {hvdc(1), hvdc(2), hvdc(3), hvdc(4)};
        net.ac_edges = {{2, 3, 1.0}};
        net.dc_edges = {{1, 2, 2.0}, {3, 4, 2.0}};
        net.validate();
        const LaplacianSet lap = build_laplacians(net);
        REQUIRE(lap.subnetworks.size() == 2);
        CHECK(lap.subnetworks[0].nodes == std::vector<std::size_t>{0, 1});
        CHECK(lap.subnetworks[1].nodes == std::vector<std::size_t>{2, 3});
        for (const auto& s : lap.subnetworks) {
            CHECK(s.lambda_min == doctest::Approx(4.0));
        }
        CHECK(lap.lambda_dc_max == doctest::Approx(4.0));
        CHECK_FALSE(lap.subnetwork_of[0] == lap.subnetwork_of[2]);
    }

    TEST_CASE("angle scale multiplies L_ac only") {
        NetworkCase net;
        net.buses = {hvdc(1), hvdc(2)};
        net.ac_edges = {{1, 2, 2.0}};
        net.dc_edges = {{1, 2, 3.0}};
        net.angle_scale = 10.0;
        net.validate();
        const LaplacianSet lap = build_laplacians(net);
        CHECK(lap.L_ac(0, 0) == doctest::Approx(20.0));
        CHECK(lap.L_dc(0, 0) == doctest::Approx(3.0));
    }

    TEST_CASE("validation errors") {
        NetworkCase dc_on_sg;
        dc_on_sg.buses = {sg(1), hvdc(2)};
        dc_on_sg.dc_edges = {{1, 2, 1.0}};
        try {
            dc_on_sg.validate();
            FAIL("expected NetworkError");
        } catch (const NetworkError& e) {
            CHECK(std::string(e.what()).find("bus 1") != std::string::npos);
        }

        NetworkCase loop;
        loop.buses = {sg(1), sg(2)};
        loop.ac_edges = {{1, 1, 1.0}};
        CHECK_THROWS_AS(loop.validate(), NetworkError);

        NetworkCase disconnected;
        disconnected.buses = {sg(1), sg(2), sg(3)};
        disconnected.ac_edges = {{1, 2, 1.0}};
        try {
            disconnected.validate();
            FAIL("expected NetworkError");
        } catch (const NetworkError& e) {
            CHECK(std::string(e.what()).find("bus 3") != std::string::npos);
        }

        NetworkCase negative;
        negative.buses = {sg(1), sg(2)};
        negative.ac_edges = {{1, 2, -1.0}};
        CHECK_THROWS_AS(negative.validate(), NetworkError);

        NetworkCase dup;
        dup.buses = {sg(1), sg(1)};
        CHECK_THROWS_AS(dup.validate(), NetworkError);

        NetworkCase unknown;
        unknown.buses = {sg(1), sg(2)};
        unknown.ac_edges = {{1, 7, 1.0}};
        CHECK_THROWS_AS(unknown.validate(), NetworkError);

        NetworkCase empty;
        CHECK_THROWS_AS(empty.validate(), NetworkError);
    }

    TEST_CASE("Kron reduction oracles") {
        // series path 1-2-3, eliminate the middle node
        const Eigen::MatrixXd path = laplacian_from_edges(3, {{0, 1, 2.0}, {1, 2, 2.0}});
        const KronResult series = kron_reduce(path, {0, 2});
        CHECK(-series.reduced(0, 1) == doctest::Approx(1.0));
        CHECK(series.load_map(0, 1) == doctest::Approx(0.5));
        CHECK(series.load_map(1, 1) == doctest::Approx(0.5));

        // star with legs 3, 3, 3 -> uniform triangle with b = 1
        const Eigen::MatrixXd star = laplacian_from_edges(4, {{0, 3, 3.0}, {1, 3, 3.0}, {2, 3, 3.0}});
        const KronResult tri = kron_reduce(star, {0, 1, 2});
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
                CHECK(tri.reduced(a, b) == doctest::Approx(a == b ? 2.0 : -1.0));
            }
        }

        const KronResult id = kron_reduce(star, {3, 2, 1, 0, 0});
        CHECK(id.keep == std::vector<std::size_t>{0, 1, 2, 3});
        CHECK(id.load_map.isApprox(Eigen::MatrixXd::Identity(4, 4)));
        CHECK(id.reduced.isApprox(star));

        // an eliminated node with no path to a kept node
        const Eigen::MatrixXd split = laplacian_from_edges(4, {{0, 1, 1.0}, {2, 3, 1.0}});
        CHECK_THROWS_AS((void)kron_reduce(split, {0, 1}), SingularMatrixError);
    }

    TEST_CASE("stator elimination oracles") {
        const StatorElimination one = stator_elimination({{2.0, 0.1}}, Eigen::MatrixXd::Zero(1, 1));
        CHECK(one.L_s(0, 0) == doctest::Approx(2.0));
        CHECK(one.divider(0, 0) == doctest::Approx(1.0));
        CHECK(std::abs(one.rotor_equivalent(0, 0)) < 1e-14);
        CHECK(one.gamma(0) == doctest::Approx(0.05));

        const Eigen::MatrixXd line = laplacian_from_edges(2, {{0, 1, 1.0}});
        const StatorElimination two = stator_elimination({{1.0, 0.0}, {1.0, 0.0}}, line);
        CHECK(two.divider(0, 0) == doctest::Approx(2.0 / 3.0));
        CHECK(two.divider(0, 1) == doctest::Approx(1.0 / 3.0));
        CHECK(two.divider(1, 0) == doctest::Approx(1.0 / 3.0));
        CHECK(two.divider(1, 1) == doctest::Approx(2.0 / 3.0));
    }

    TEST_CASE("property: Laplacian structure on random cases") {
        std::mt19937_64 rng(21);
        for (int trial = 0; trial < 100; ++trial) {
            const NetworkCase net = testing::random_case(rng);
            const LaplacianSet lap = build_laplacians(net);
            const auto n = static_cast<Eigen::Index>(net.size());
            CHECK(lap.L_ac.rowwise().sum().cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, lap.L_ac.cwiseAbs().maxCoeff()));
            CHECK(lap.L_dc.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, lap.L_dc.cwiseAbs().maxCoeff()));
            Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
            for (const auto& s : lap.subnetworks) {
                CHECK(s.nodes.size() >= 2);
                CHECK(s.lambda_min > 0.0);
                sum += s.laplacian;
            }
            CHECK((sum - lap.L_dc).cwiseAbs().maxCoeff() < 1e-12);
            for (Eigen::Index a = 0; a < n; ++a) {
                for (Eigen::Index b = 0; b < n; ++b) {
                    if (a != b) {
                        CHECK(lap.L_ac(a, b) <= 0.0);
                        CHECK(lap.L_dc(a, b) <= 0.0);
                    }
                }
            }
            // spectrum of L_dc equals the union of the subnetwork spectra plus zeros
            std::vector<double> expected;
            std::size_t covered = 0;
            for (const auto& s : lap.subnetworks) {
                const auto m = static_cast<Eigen::Index>(s.nodes.size());
                Eigen::MatrixXd local(m, m);
                for (Eigen::Index a = 0; a < m; ++a)
                    for (Eigen::Index b = 0; b < m; ++b)
                        local(a, b) = s.laplacian(static_cast<Eigen::Index>(s.nodes[static_cast<std::size_t>(a)]),
                                                  static_cast<Eigen::Index>(s.nodes[static_cast<std::size_t>(b)]));
                const auto ev = sorted_eigenvalues(local);
                expected.insert(expected.end(), ev.begin(), ev.end());
                covered += s.nodes.size();
            }
            expected.resize(expected.size() + (net.size() - covered), 0.0);
            std::sort(expected.begin(), expected.end());
            const auto actual = sorted_eigenvalues(lap.L_dc);
            for (std::size_t k = 0; k < actual.size(); ++k) {
                CHECK(actual[k] == doctest::Approx(expected[k]).epsilon(1e-9).scale(1.0));
            }
        }
    }

    TEST_CASE("property: Kron reduction preserves boundary power flow") {
        std::mt19937_64 rng(22);
        for (int trial = 0; trial < 100; ++trial) {
            const int n = std::uniform_int_distribution<int>(3, 15)(rng);
            const Eigen::MatrixXd L = testing::random_laplacian(rng, n);
            std::vector<std::size_t> keep;
            for (int i = 0; i < n; ++i) {
                if (i == 0 || std::bernoulli_distribution(0.4)(rng)) keep.push_back(static_cast<std::size_t>(i));
            }
            const KronResult k = kron_reduce(L, keep);
            // balanced boundary injections, zero interior injections
            Eigen::VectorXd pk = Eigen::VectorXd::Random(static_cast<Eigen::Index>(keep.size()));
            pk.array() -= pk.mean();
            Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
            for (std::size_t a = 0; a < keep.size(); ++a) p(static_cast<Eigen::Index>(keep[a])) = pk(static_cast<Eigen::Index>(a));
            const Eigen::VectorXd theta = L.completeOrthogonalDecomposition().solve(p);
            Eigen::VectorXd theta_k(static_cast<Eigen::Index>(keep.size()));
            for (std::size_t a = 0; a < keep.size(); ++a) theta_k(static_cast<Eigen::Index>(a)) = theta(static_cast<Eigen::Index>(keep[a]));
            CHECK((k.reduced * theta_k - pk).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, L.cwiseAbs().maxCoeff()));
            // load map columns are convex weights
            for (Eigen::Index c = 0; c < k.load_map.cols(); ++c) {
                CHECK(k.load_map.col(c).sum() == doctest::Approx(1.0).epsilon(1e-10));
                CHECK(k.load_map.col(c).minCoeff() >= -1e-12);
            }
        }
    }

    TEST_CASE("property: stator divider is row-stochastic and nonnegative") {
        std::mt19937_64 rng(23);
        std::uniform_real_distribution<double> u(0.5, 10.0);
        for (int trial = 0; trial < 50; ++trial) {
            const int n = std::uniform_int_distribution<int>(1, 6)(rng);
            std::vector<MachineStator> ms;
            for (int i = 0; i < n; ++i) ms.push_back({u(rng), 0.1 * u(rng)});
            const Eigen::MatrixXd net = n > 1 ? testing::random_laplacian(rng, n) : Eigen::MatrixXd::Zero(1, 1);
            const StatorElimination se = stator_elimination(ms, net);
            for (Eigen::Index r = 0; r < n; ++r) {
                CHECK(se.divider.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
                CHECK(se.divider.row(r).minCoeff() >= -1e-14);
            }
            Eigen::VectorXd b(n);
            for (int i = 0; i < n; ++i) b(i) = ms[static_cast<std::size_t>(i)].b;
            const Eigen::MatrixXd net_part = se.L_s - Eigen::MatrixXd(b.asDiagonal());
            CHECK(net_part.rowwise().sum().cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}
