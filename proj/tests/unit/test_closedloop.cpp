#include <doctest.h>

#include <random>

#include "hybridstab/casefile.hpp"
#include "hybridstab/closedloop.hpp"
#include "hybridstab/error.hpp"
#include "hybridstab/stability.hpp"
#include "random_cases.hpp"

using namespace hybridstab;

namespace {

BusEntry sg(int id, double jw0, double kg, double tau, double gamma) {
    return {id, make_bus(BusKind::SG_governor, {{"Jw0", jw0}, {"kg", kg}, {"tau", tau}, {"gamma", gamma}}), 0.0};
}

NetworkCase two_machines(double b, double gamma = 0.02) {
    NetworkCase net;
    net.buses = {sg(1, 7.4, 20.0, 3.0, gamma), sg(2, 7.4, 20.0, 3.0, gamma)};
    net.ac_edges = {{1, 2, b}};
    net.disturbances = {{1, 0.1, 0.5}};
    net.validate();
    return net;
}

double rel_diff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace

TEST_SUITE("closedloop") {
    TEST_CASE("single governed machine") {
        NetworkCase net;
        net.buses = {sg(1, 7.4, 20.0, 3.0, 0.05)};
        net.validate();
        const ClosedLoopModel m = assemble(net);
        for (double w : {1e-3, 0.1, 1.0, 7.0, 100.0}) {
            const Complex s(0.0, w);
            const Complex expect = (1.0 + 3.0 * s) * (1.0 + 0.05 * s) / (7.4 * s * (1.0 + 3.0 * s) + 20.0);
            CHECK(std::abs(h_blocks(m, s)(0, 0) - expect) < 1e-12 * std::max(1.0, std::abs(expect)));
        }
        const Eigen::VectorXd lim = h_limit_at_zero(m, Eigen::VectorXd::Ones(1));
        CHECK(lim(0) == doctest::Approx(0.05).epsilon(1e-8));
    }

    TEST_CASE("identical machines decouple into network modes") {
        const double b = 3.0;
        const NetworkCase net = two_machines(b);
        const ClosedLoopModel m = assemble(net);
        const BusModel& bus = m.buses[0];
        Eigen::MatrixXd U(2, 2);
        U << 1.0, 1.0, 1.0, -1.0;
        U /= std::sqrt(2.0);
        for (double w : {0.01, 0.5, 2.0, 30.0}) {
            const Complex s(0.0, w);
            const Complex gk_inv = bus.gk_inv(s);
            Eigen::MatrixXcd modal = Eigen::MatrixXcd::Zero(2, 2);
            modal(0, 0) = 1.0 / gk_inv;
            modal(1, 1) = 1.0 / (gk_inv + 2.0 * b / s);
            const Eigen::MatrixXcd expect = U.cast<Complex>() * modal * U.transpose().cast<Complex>();
            CHECK(rel_diff(h_blocks(m, s), expect) < 1e-12);
            CHECK(rel_diff(h_inverse(m.buses, m.lap, s).inverse(), expect) < 1e-10);
            REQUIRE(m.realization);
            const Eigen::MatrixXcd kinv = Eigen::MatrixXcd::Identity(2, 2) * bus.k_inv(s);
            CHECK(rel_diff(h_realization(*m.realization, s), expect * kinv) < 1e-9);
            AssembleOptions plain;
            plain.prefilter = false;
            CHECK(rel_diff(h_realization(*assemble(net, plain).realization, s), expect) < 1e-9);
        }
    }

    TEST_CASE("frequency response symmetry and Hermitian-part sigma bound") {
        const NetworkCase net = two_machines(4.0);
        const ClosedLoopModel m = assemble(net);
        const std::vector<FrequencyPoint> fr = freq_response(m, {0.05, 0.7, 3.0, 40.0});
        for (const auto& p : fr) {
            const Eigen::MatrixXcd Hc = h_blocks(m, Complex(0.0, -p.omega));
            CHECK(rel_diff(Hc, p.H.conjugate()) < 1e-12);
            CHECK(p.herm_min > 0.0);
            CHECK(p.sigma_max <= (1.0 / p.herm_min) * (1.0 + 1e-10));
            const Lemma1Result l1 = lemma1_bound(h_inverse(m.buses, m.lap, Complex(0.0, p.omega)), 1.0 / p.herm_min);
            CHECK(l1.premise);
            CHECK(l1.conclusion);
        }
    }

    TEST_CASE("eigen audit of an undamped-governor machine") {
        NetworkCase net;
        net.buses = {sg(1, 7.4, 20.0, 3.0, 0.0)};
        net.validate();
        const ClosedLoopModel m = assemble(net);
        const auto audit = eigen_audit(m);
        int structural = 0;
        std::vector<Complex> stable;
        for (const auto& e : audit) {
            if (e.tag == EigenTag::Structural) {
                ++structural;
            } else {
                CHECK(e.tag == EigenTag::Stable);
                stable.push_back(e.value);
            }
        }
        CHECK(structural == 1);
        REQUIRE(stable.size() == 2);
        // roots of Jw0 tau s^2 + Jw0 s + kg
        for (const Complex& l : stable) {
            CHECK(std::abs(7.4 * 3.0 * l * l + 7.4 * l + 20.0) < 1e-9);
        }
    }

    TEST_CASE("zero disturbance gives zero traces") {
        NetworkCase net = two_machines(2.0);
        net.disturbances = {{1, 0.0, 1.0}};
        const ClosedLoopModel m = assemble(net);
        SimulationOptions o;
        o.t_end = 3.0;
        o.dt = 1e-3;
        const SimulationResult r = simulate(m, net.disturbances, o);
        CHECK(r.samples() == 3001);
        CHECK(r.omega.cwiseAbs().maxCoeff() == 0.0);
        CHECK(r.f_dev.cwiseAbs().maxCoeff() == 0.0);
    }

    TEST_CASE("simulation settles at the H(0+) steady state") {
        const NetworkCase net = two_machines(2.0);
        const ClosedLoopModel m = assemble(net);
        SimulationOptions o;
        o.t_end = 200.0;
        o.dt = 2e-3;
        o.record_every = 500;
        const SimulationResult r = simulate(m, net.disturbances, o);
        Eigen::VectorXd p = Eigen::VectorXd::Zero(2);
        p(0) = 0.1;
        const Eigen::VectorXd lim = h_limit_at_zero(m, p);
        CHECK(lim(0) == doctest::Approx(0.1 / 40.0).epsilon(1e-6));
        const Eigen::Index last = r.omega.rows() - 1;
        for (Eigen::Index i = 0; i < 2; ++i) {
            // loads enter as consumption
            CHECK(std::abs(r.omega(last, i) + lim(i)) <= 1e-6 * std::abs(lim(i)));
        }
    }

    TEST_CASE("step size precondition") {
        const NetworkCase net = two_machines(2.0);
        const ClosedLoopModel m = assemble(net);
        SimulationOptions o;
        o.dt = 10.0 / spectral_radius(*m.realization);
        CHECK_THROWS_AS((void)simulate(m, net.disturbances, o), ParameterError);
    }

    TEST_CASE("damper time constant shrinks the frequency spread") {
        auto spread = [](double gamma) {
            const NetworkCase net = two_machines(0.5, gamma);
            const ClosedLoopModel m = assemble(net);
            SimulationOptions o;
            o.t_end = 8.0;
            o.dt = 1e-3;
            const SimulationResult r = simulate(m, net.disturbances, o);
            double late = 0.0;
            for (std::size_t k = 0; k < r.samples(); ++k) {
                if (r.t[k] >= 5.5) late = std::max(late, r.f_dev.row(static_cast<Eigen::Index>(k)).cwiseAbs().maxCoeff());
            }
            return late;
        };
        const double none = spread(0.0);
        const double some = spread(0.05);
        const double more = spread(0.5);
        CHECK(some < none);
        CHECK(more < some);
    }

    TEST_CASE("passive buses are rejected") {
        NetworkCase net = two_machines(2.0);
        net.buses.push_back({3, make_bus(BusKind::Passive, {}), 0.0});
        net.ac_edges.push_back({2, 3, 1.0});
        net.validate();
        CHECK_THROWS_AS((void)assemble(net), NetworkError);
    }

    TEST_CASE("random certified cases have a stable realization") {
        std::mt19937_64 rng(404);
        int certified = 0;
        for (int trial = 0; trial < 40; ++trial) {
            const NetworkCase net = testing::random_case(rng, {});
            AnalysisOptions ao;
            ao.grid_points = 200;
            if (certify(net, ao).overall != Verdict::Pass) continue;
            ++certified;
            AssembleOptions plain;
            plain.prefilter = false;
            const ClosedLoopModel m = assemble(net, plain);
            if (!m.realization) continue;
            for (const auto& e : eigen_audit(m)) {
                if (e.tag != EigenTag::Structural) CHECK(e.value.real() <= kEigenMarginTol);
            }
            for (double w : {0.3, 3.0}) {
                const Complex s(0.0, w);
                CHECK(rel_diff(h_blocks(m, s), h_realization(*m.realization, s)) < 1e-8);
            }
        }
        CHECK(certified > 0);
    }
}
