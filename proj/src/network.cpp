#include "hybridstab/network.hpp"

#include "hybridstab/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

namespace hybridstab {

namespace {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

private:
    std::vector<std::size_t> parent_;
};

std::string bus_label(int id) {
    return "bus " + std::to_string(id);
}

}  // namespace

std::size_t NetworkCase::index_of(int id) const {
    const auto it = std::find_if(buses.begin(), buses.end(), [id](const BusEntry& b) { return b.id == id; });
    if (it == buses.end()) {
        throw NetworkError("reference to unknown " + bus_label(id));
    }
    return static_cast<std::size_t>(it - buses.begin());
}

bool NetworkCase::has_bus(int id) const {
    return std::any_of(buses.begin(), buses.end(), [id](const BusEntry& b) { return b.id == id; });
}

bool NetworkCase::has_passive_buses() const {
    return std::any_of(buses.begin(), buses.end(), [](const BusEntry& b) { return b.model.passive(); });
}

void NetworkCase::validate() {
    if (buses.empty()) {
        throw NetworkError("network has no buses");
    }
    if (!(angle_scale > 0.0) || !std::isfinite(angle_scale)) {
        throw NetworkError("angle scale must be positive");
    }
    std::sort(buses.begin(), buses.end(), [](const BusEntry& a, const BusEntry& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < buses.size(); ++i) {
        if (buses[i].id == buses[i - 1].id) {
            throw NetworkError("duplicate " + bus_label(buses[i].id));
        }
    }
    for (const auto& b : buses) {
        if (!std::isfinite(b.p_load)) {
            throw NetworkError(bus_label(b.id) + ": load is not finite");
        }
    }
    UnionFind uf(buses.size());
    for (const auto& e : ac_edges) {
        const auto i = index_of(e.from);
        const auto j = index_of(e.to);
        if (i == j) {
            throw NetworkError("AC line is a self-loop at " + bus_label(e.from));
        }
        if (!(e.b > 0.0) || !std::isfinite(e.b)) {
            throw NetworkError("AC line " + std::to_string(e.from) + "-" + std::to_string(e.to) +
                               ": susceptance must be positive");
        }
        uf.unite(i, j);
    }
    for (const auto& e : dc_edges) {
        const auto i = index_of(e.from);
        const auto j = index_of(e.to);
        if (i == j) {
            throw NetworkError("DC line is a self-loop at " + bus_label(e.from));
        }
        if (!(e.g > 0.0) || !std::isfinite(e.g)) {
            throw NetworkError("DC line " + std::to_string(e.from) + "-" + std::to_string(e.to) +
                               ": conductance must be positive");
        }
        for (const auto idx : {i, j}) {
            if (!buses[idx].model.converter()) {
                throw NetworkError("DC line touches non-converter " + bus_label(buses[idx].id) +
                                   " (kind " + std::string(to_string(buses[idx].model.kind)) + ")");
            }
        }
        uf.unite(i, j);
    }
    for (const auto& d : disturbances) {
        (void)index_of(d.bus);
        if (!std::isfinite(d.magnitude) || !std::isfinite(d.time) || d.time < 0.0) {
            throw NetworkError("disturbance at " + bus_label(d.bus) + " has invalid magnitude/time");
        }
    }
    const std::size_t root = uf.find(0);
    for (std::size_t i = 1; i < buses.size(); ++i) {
        if (uf.find(i) != root) {
            throw NetworkError("AC/DC network is disconnected: " + bus_label(buses[i].id) +
                               " is not reachable from " + bus_label(buses[0].id));
        }
    }
}

Eigen::MatrixXd laplacian_from_edges(
    std::size_t n, const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (const auto& [i, j, w] : edges) {
        const auto a = static_cast<Eigen::Index>(i);
        const auto b = static_cast<Eigen::Index>(j);
        L(a, a) += w;
        L(b, b) += w;
        L(a, b) -= w;
        L(b, a) -= w;
    }
    return L;
}

double smallest_nonzero_eigenvalue(const Eigen::MatrixXd& sym) {
    if (sym.rows() == 0) {
        return 0.0;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const double tol = 1e-9 * std::max(1.0, ev.maxCoeff());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) > tol) {
            return ev(i);
        }
    }
    return 0.0;
}

LaplacianSet build_laplacians(const NetworkCase& net) {
    const std::size_t n = net.size();
    LaplacianSet out;

    std::vector<std::tuple<std::size_t, std::size_t, double>> ac;
    for (const auto& e : net.ac_edges) {
        ac.emplace_back(net.index_of(e.from), net.index_of(e.to), e.b * net.angle_scale);
    }
    out.L_ac = laplacian_from_edges(n, ac);

    std::vector<std::tuple<std::size_t, std::size_t, double>> dc;
    UnionFind uf(n);
    std::vector<bool> on_dc(n, false);
    for (const auto& e : net.dc_edges) {
        const auto i = net.index_of(e.from);
        const auto j = net.index_of(e.to);
        if (!net.buses[i].model.converter() || !net.buses[j].model.converter()) {
            throw NetworkError("DC line " + std::to_string(e.from) + "-" + std::to_string(e.to) +
                               " touches a non-converter bus");
        }
        dc.emplace_back(i, j, e.g);
        uf.unite(i, j);
        on_dc[i] = on_dc[j] = true;
    }
    out.L_dc = laplacian_from_edges(n, dc);

    // Subnetworks ordered by their smallest bus index.
    out.subnetwork_of.assign(n, std::nullopt);
    std::vector<std::optional<std::size_t>> root_to_sub(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!on_dc[i]) {
            continue;
        }
        const auto r = uf.find(i);
        if (!root_to_sub[r]) {
            root_to_sub[r] = out.subnetworks.size();
            out.subnetworks.emplace_back();
        }
        out.subnetworks[*root_to_sub[r]].nodes.push_back(i);
        out.subnetwork_of[i] = root_to_sub[r];
    }
    for (auto& sub : out.subnetworks) {
        std::vector<std::tuple<std::size_t, std::size_t, double>> edges;
        for (const auto& e : dc) {
            if (out.subnetwork_of[std::get<0>(e)] == out.subnetwork_of[sub.nodes.front()]) {
                edges.push_back(e);
            }
        }
        sub.laplacian = laplacian_from_edges(n, edges);
        const auto m = static_cast<Eigen::Index>(sub.nodes.size());
        Eigen::MatrixXd local(m, m);
        for (Eigen::Index a = 0; a < m; ++a) {
            for (Eigen::Index b = 0; b < m; ++b) {
                local(a, b) = sub.laplacian(static_cast<Eigen::Index>(sub.nodes[a]),
                                            static_cast<Eigen::Index>(sub.nodes[b]));
            }
        }
        sub.lambda_min = smallest_nonzero_eigenvalue(local);
    }

    if (n > 0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ac_es(out.L_ac, Eigen::EigenvaluesOnly);
        out.lambda_ac_max = std::max(0.0, ac_es.eigenvalues().maxCoeff());
        out.lambda_ac_min = smallest_nonzero_eigenvalue(out.L_ac);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dc_es(out.L_dc, Eigen::EigenvaluesOnly);
        out.lambda_dc_max = std::max(0.0, dc_es.eigenvalues().maxCoeff());
    }
    return out;
}

KronResult kron_reduce(const Eigen::MatrixXd& L, std::vector<std::size_t> keep) {
    const auto n = static_cast<std::size_t>(L.rows());
    if (L.rows() != L.cols()) {
        throw Error("Kron reduction needs a square matrix");
    }
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    std::vector<std::size_t> elim;
    for (std::size_t i = 0, k = 0; i < n; ++i) {
        if (k < keep.size() && keep[k] == i) {
            ++k;
        } else {
            elim.push_back(i);
        }
    }
    if (!keep.empty() && keep.back() >= n) {
        throw Error("Kron reduction keep index out of range");
    }
    const auto nk = static_cast<Eigen::Index>(keep.size());
    const auto ne = static_cast<Eigen::Index>(elim.size());
    auto idx = [](std::size_t v) { return static_cast<Eigen::Index>(v); };

    Eigen::MatrixXd Lkk(nk, nk), Lke(nk, ne), Lek(ne, nk), Lee(ne, ne);
    for (Eigen::Index a = 0; a < nk; ++a) {
        for (Eigen::Index b = 0; b < nk; ++b) Lkk(a, b) = L(idx(keep[a]), idx(keep[b]));
        for (Eigen::Index b = 0; b < ne; ++b) Lke(a, b) = L(idx(keep[a]), idx(elim[b]));
    }
    for (Eigen::Index a = 0; a < ne; ++a) {
        for (Eigen::Index b = 0; b < nk; ++b) Lek(a, b) = L(idx(elim[a]), idx(keep[b]));
        for (Eigen::Index b = 0; b < ne; ++b) Lee(a, b) = L(idx(elim[a]), idx(elim[b]));
    }

    KronResult out;
    out.keep = keep;
    out.load_map = Eigen::MatrixXd::Zero(nk, static_cast<Eigen::Index>(n));
    for (Eigen::Index a = 0; a < nk; ++a) {
        out.load_map(a, idx(keep[a])) = 1.0;
    }
    if (ne == 0) {
        out.reduced = Lkk;
        return out;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Lee);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) {
        throw SingularMatrixError("interior block of the Kron reduction is singular (an eliminated "
                                  "bus group has no path to a kept bus)");
    }
    const Eigen::MatrixXd LeeInvLek = lu.solve(Lek);
    out.reduced = Lkk - Lke * LeeInvLek;
    out.reduced = 0.5 * (out.reduced + out.reduced.transpose()).eval();
    // Interior injections spread onto kept buses with weights -Lke Lee^{-1}.
    const Eigen::MatrixXd spread = -Lke * lu.inverse();
    for (Eigen::Index a = 0; a < nk; ++a) {
        for (Eigen::Index b = 0; b < ne; ++b) {
            out.load_map(a, idx(elim[b])) = spread(a, b);
        }
    }
    return out;
}

StatorElimination stator_elimination(const std::vector<MachineStator>& machines,
                                     const Eigen::MatrixXd& stator_network) {
    const auto n = static_cast<Eigen::Index>(machines.size());
    if (stator_network.rows() != n || stator_network.cols() != n) {
        throw Error("stator network size does not match the machine count");
    }
    Eigen::VectorXd b(n), d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(machines[static_cast<std::size_t>(i)].b > 0.0)) {
            throw ParameterError("stator susceptance must be positive", "b_stator");
        }
        b(i) = machines[static_cast<std::size_t>(i)].b;
        d(i) = machines[static_cast<std::size_t>(i)].damping;
    }
    StatorElimination out;
    const Eigen::MatrixXd DB = b.asDiagonal();
    out.L_s = stator_network + DB;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(out.L_s);
    if (!lu.isInvertible()) {
        throw SingularMatrixError("loopy stator Laplacian is singular");
    }
    const Eigen::MatrixXd Ls_inv = lu.inverse();
    out.divider = Ls_inv * DB;
    out.rotor_equivalent = DB - DB * Ls_inv * DB;
    out.load_map = DB * Ls_inv;
    out.gamma = d.cwiseQuotient(b);
    return out;
}

}  // namespace hybridstab
