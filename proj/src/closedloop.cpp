#include "hybridstab/closedloop.hpp"

#include "hybridstab/error.hpp"
#include "hybridstab/stability.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace hybridstab {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

struct BlockDiag {
    MatrixXd A, B, C, D, E;
    std::vector<Index> offset;  // state offset per bus
};

// Block-diagonal stack of SISO realizations; bus i maps input i to output i.
BlockDiag stack(const std::vector<StateSpace>& parts) {
    BlockDiag out;
    const auto n = static_cast<Index>(parts.size());
    Index total = 0;
    for (const auto& p : parts) {
        out.offset.push_back(total);
        total += p.states();
    }
    out.A = MatrixXd::Zero(total, total);
    out.B = MatrixXd::Zero(total, n);
    out.C = MatrixXd::Zero(n, total);
    out.D = MatrixXd::Zero(n, n);
    out.E = MatrixXd::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        const auto& p = parts[static_cast<std::size_t>(i)];
        const Index o = out.offset[static_cast<std::size_t>(i)];
        const Index m = p.states();
        out.A.block(o, o, m, m) = p.A;
        out.B.block(o, i, m, 1) = p.B;
        out.C.block(i, o, 1, m) = p.C;
        out.D(i, i) = p.D(0, 0);
        out.E(i, i) = p.E(0, 0);
    }
    return out;
}

StateSpace identity_block() {
    StateSpace ss;
    ss.A = MatrixXd::Zero(0, 0);
    ss.B = MatrixXd::Zero(0, 1);
    ss.C = MatrixXd::Zero(1, 0);
    ss.D = MatrixXd::Constant(1, 1, 1.0);
    ss.E = MatrixXd::Zero(1, 1);
    return ss;
}

Realization build_realization(const ClosedLoopModel& m, bool prefilter) {
    const auto n = static_cast<Index>(m.size());
    std::vector<StateSpace> gs, ks, fs;
    for (std::size_t i = 0; i < m.buses.size(); ++i) {
        const auto& b = m.buses[i];
        const std::string who = "bus " + std::to_string(m.bus_ids[i]);
        StateSpace g;
        try {
            g = realize(b.g);
        } catch (const ImproperError&) {
            throw ImproperError(who + ": g(s) = " + b.g.to_string() + " is improper and has no realization");
        }
        if (g.E(0, 0) != 0.0) {
            throw ImproperError(who + ": g(s) = " + b.g.to_string() + " has a derivative feedthrough");
        }
        gs.push_back(std::move(g));
        try {
            ks.push_back(realize(b.k));
        } catch (const ImproperError&) {
            throw ImproperError(who + ": k(s) = " + b.k.to_string() + " is improper by more than one degree");
        }
        if (prefilter && b.machine()) {
            fs.push_back(realize(b.k_inv));
            if (fs.back().E(0, 0) != 0.0) {
                throw ImproperError(who + ": k^{-1}(s) prefilter is improper");
            }
        } else {
            fs.push_back(identity_block());
        }
    }
    const BlockDiag G = stack(gs);
    const BlockDiag K = stack(ks);
    const BlockDiag F = stack(fs);

    Realization r;
    r.prefilter = prefilter;
    r.n_g = G.A.rows();
    r.n_k = K.A.rows();
    r.n_f = F.A.rows();
    r.n_theta = m.angle_basis.cols();
    const Index N = r.n_g + r.n_k + r.n_f + r.n_theta;
    const Index og = 0;
    const Index ok = r.n_g;
    const Index of = ok + r.n_k;
    const Index ot = of + r.n_f;

    auto sel = [&](Index off, Index rows) {
        MatrixXd s = MatrixXd::Zero(rows, N);
        s.block(0, off, rows, rows).setIdentity();
        return s;
    };
    const MatrixXd Sg = sel(og, r.n_g);
    const MatrixXd Sk = sel(ok, r.n_k);
    const MatrixXd Sf = sel(of, r.n_f);
    const MatrixXd St = sel(ot, r.n_theta);
    const MatrixXd& Ldc = m.lap.L_dc;

    // Prefiltered disturbance w, network angle power L_ac U theta.
    const SignalMap W{F.C * Sf, F.D};
    const MatrixXd Pac = m.lap.L_ac * m.angle_basis * St;

    const MatrixXd loop = MatrixXd::Identity(n, n) + G.D * Ldc;
    Eigen::FullPivLU<MatrixXd> lu(loop);
    if (!lu.isInvertible()) {
        throw AlgebraicLoopError("feedthrough loop I + G_D L_dc is singular");
    }
    for (Index i = 0; i < n; ++i) {
        if (K.E(i, i) != 0.0 && G.D(i, i) != 0.0) {
            throw AlgebraicLoopError("bus " + std::to_string(m.bus_ids[static_cast<std::size_t>(i)]) +
                                     ": derivative k block fed by a g block with direct feedthrough");
        }
    }
    SignalMap Z;
    Z.x = lu.solve(G.C * Sg - G.D * (W.x + Pac));
    Z.p = lu.solve(-G.D * W.p);

    SignalMap U;
    U.x = -W.x - Pac - Ldc * Z.x;
    U.p = -W.p - Ldc * Z.p;

    SignalMap Xg{G.A * Sg + G.B * U.x, G.B * U.p};
    SignalMap Zd{G.C * Xg.x, G.C * Xg.p};

    SignalMap Om;
    Om.x = K.C * Sk + K.D * Z.x + K.E * Zd.x;
    Om.p = K.D * Z.p + K.E * Zd.p;

    SignalMap Xk{K.A * Sk + K.B * Z.x, K.B * Z.p};
    SignalMap Xf{F.A * Sf, F.B};
    SignalMap Th{m.angle_basis.transpose() * Om.x, m.angle_basis.transpose() * Om.p};

    r.A = MatrixXd::Zero(N, N);
    r.B = MatrixXd::Zero(N, n);
    r.A.middleRows(og, r.n_g) = Xg.x;
    r.A.middleRows(ok, r.n_k) = Xk.x;
    r.A.middleRows(of, r.n_f) = Xf.x;
    r.A.middleRows(ot, r.n_theta) = Th.x;
    r.B.middleRows(og, r.n_g) = Xg.p;
    r.B.middleRows(ok, r.n_k) = Xk.p;
    r.B.middleRows(of, r.n_f) = Xf.p;
    r.B.middleRows(ot, r.n_theta) = Th.p;
    r.omega = Om;
    r.z = Z;
    return r;
}

}  // namespace

const Realization& ClosedLoopModel::require_realization() const {
    if (!realization) {
        throw Error("closed loop has no state-space realization: " + realization_error);
    }
    return *realization;
}

ClosedLoopModel assemble(const NetworkCase& net, const AssembleOptions& opts) {
    if (net.buses.empty()) {
        throw NetworkError("network has no buses");
    }
    if (net.has_passive_buses()) {
        throw NetworkError("case contains passive buses; Kron-reduce them first (kron command or --auto-kron)");
    }
    ClosedLoopModel m;
    m.lap = build_laplacians(net);
    m.angle_scale = net.angle_scale;
    for (const auto& b : net.buses) {
        m.bus_ids.push_back(b.id);
        m.buses.push_back(b.model);
    }
    const auto n = static_cast<Index>(m.size());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m.lap.L_ac);
    const double tol = 1e-9 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    std::vector<Index> cols;
    for (Index i = 0; i < n; ++i) {
        if (es.eigenvalues()(i) > tol) {
            cols.push_back(i);
        }
    }
    m.angle_basis = MatrixXd(n, static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        m.angle_basis.col(static_cast<Index>(c)) = es.eigenvectors().col(cols[c]);
    }
    m.structural_zeros = n - static_cast<Index>(cols.size());

    try {
        m.realization = build_realization(m, opts.prefilter);
    } catch (const Error& e) {
        if (opts.require_realization) {
            throw;
        }
        m.realization_error = e.what();
    }
    return m;
}

Eigen::MatrixXcd h_blocks(const ClosedLoopModel& model, Complex s) {
    // long double throughout
    using CL = std::complex<long double>;
    using ML = Eigen::Matrix<CL, Eigen::Dynamic, Eigen::Dynamic>;
    const auto n = static_cast<Index>(model.size());
    Eigen::Matrix<CL, Eigen::Dynamic, 1> g(n), k(n);
    for (Index i = 0; i < n; ++i) {
        const auto& b = model.buses[static_cast<std::size_t>(i)];
        g(i) = CL(b.g(s));
        k(i) = CL(b.k(s));
    }
    const ML Ldc = model.lap.L_dc.cast<CL>();
    const ML Lac = model.lap.L_ac.cast<CL>();
    const ML loop = ML::Identity(n, n) + g.asDiagonal() * Ldc + (g.asDiagonal() * Lac * k.asDiagonal()) / CL(s);
    const ML Gm = g.asDiagonal();
    const ML h = k.asDiagonal() * loop.fullPivLu().solve(Gm);
    return h.cast<Complex>();
}

Eigen::MatrixXcd h_realization(const Realization& r, Complex s) {
    const Index N = r.states();
    Eigen::MatrixXcd out = r.omega.p.cast<Complex>();
    if (N > 0) {
        const Eigen::MatrixXcd pencil = s * Eigen::MatrixXcd::Identity(N, N) - r.A.cast<Complex>();
        out += r.omega.x.cast<Complex>() * pencil.partialPivLu().solve(r.B.cast<Complex>());
    }
    return -out;
}

std::vector<FrequencyPoint> freq_response(const ClosedLoopModel& model, const std::vector<double>& omegas,
                                          unsigned threads) {
    std::vector<FrequencyPoint> out(omegas.size());
    detail::parallel_for(omegas.size(), worker_threads(threads), [&](std::size_t q) {
        const double w = omegas[q];
        if (!(w > 0.0)) {
            throw Error("frequency response needs positive frequencies; the origin is handled by limits");
        }
        const Complex s(0.0, w);
        FrequencyPoint& fp = out[q];
        fp.omega = w;
        fp.H = h_blocks(model, s);
        const auto n = static_cast<Index>(model.size());
        Eigen::VectorXcd kinv(n);
        for (Index i = 0; i < n; ++i) {
            kinv(i) = model.buses[static_cast<std::size_t>(i)].k_inv(s);
        }
        fp.KinvH = kinv.asDiagonal() * fp.H;
        fp.sigma_max = Eigen::JacobiSVD<Eigen::MatrixXcd>(fp.H).singularValues()(0);
        fp.sigma_max_kinv = Eigen::JacobiSVD<Eigen::MatrixXcd>(fp.KinvH).singularValues()(0);
        const Eigen::MatrixXcd hinv = h_inverse(model.buses, model.lap, s);
        fp.herm_min = hermitian_part_min(hinv);
        const auto sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(hinv).singularValues();
        fp.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                                : std::numeric_limits<double>::infinity();
    });
    return out;
}

Eigen::VectorXd h_limit_at_zero(const ClosedLoopModel& model, const Eigen::VectorXd& p) {
    constexpr double e1 = 1e-5;
    constexpr double e2 = 0.5 * e1;
    const Eigen::MatrixXcd h1 = h_blocks(model, Complex(0.0, e1));
    const Eigen::MatrixXcd h2 = h_blocks(model, Complex(0.0, e2));
    const Eigen::MatrixXcd h0 = 2.0 * h2 - h1;
    return (h0 * p.cast<Complex>()).real();
}

MatrixXd realization_dc_gain(const Realization& r) {
    if (r.states() == 0) {
        return r.omega.p;
    }
    Eigen::FullPivLU<MatrixXd> lu(r.A);
    if (!lu.isInvertible()) {
        throw SingularMatrixError("closed-loop A matrix is singular; no finite DC gain");
    }
    return r.omega.p - r.omega.x * lu.solve(r.B);
}

const char* to_string(EigenTag t) {
    switch (t) {
        case EigenTag::Stable:
            return "stable";
        case EigenTag::Marginal:
            return "marginal";
        case EigenTag::Unstable:
            return "unstable";
        case EigenTag::Structural:
            return "structural";
    }
    return "unstable";
}

std::vector<TaggedEigenvalue> eigen_audit(const ClosedLoopModel& model) {
    const Realization& r = model.require_realization();
    std::vector<TaggedEigenvalue> out;
    if (r.states() > 0) {
        Eigen::EigenSolver<MatrixXd> es(r.A, false);
        for (Index i = 0; i < es.eigenvalues().size(); ++i) {
            const Complex l = es.eigenvalues()(i);
            EigenTag tag = EigenTag::Stable;
            if (l.real() > kEigenMarginTol) {
                tag = EigenTag::Unstable;
            } else if (l.real() >= -kEigenMarginTol) {
                tag = EigenTag::Marginal;
            }
            out.push_back({l, tag});
        }
    }
    std::sort(out.begin(), out.end(), [](const TaggedEigenvalue& a, const TaggedEigenvalue& b) {
        if (a.value.real() != b.value.real()) {
            return a.value.real() > b.value.real();
        }
        return a.value.imag() > b.value.imag();
    });
    for (Index i = 0; i < model.structural_zeros; ++i) {
        out.push_back({Complex(0.0, 0.0), EigenTag::Structural});
    }
    return out;
}

double spectral_radius(const Realization& r) {
    if (r.states() == 0) {
        return 0.0;
    }
    Eigen::EigenSolver<MatrixXd> es(r.A, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

SimulationResult simulate(const ClosedLoopModel& model, const std::vector<Disturbance>& disturbances,
                          const SimulationOptions& opts) {
    const Realization& r = model.require_realization();
    if (!(opts.dt > 0.0) || !(opts.t_end > 0.0) || opts.record_every < 1) {
        throw ParameterError("simulation needs dt > 0, t_end > 0 and record_every >= 1", "dt");
    }
    const double rho = spectral_radius(r);
    if (rho > 0.0 && opts.dt > 0.1 / rho) {
        std::ostringstream os;
        os << "dt = " << opts.dt << " s does not resolve the fastest mode |lambda| = " << rho
           << " 1/s; need dt <= " << 0.1 / rho;
        throw ParameterError(os.str(), "dt");
    }
    const auto n = static_cast<Index>(model.size());
    std::vector<std::pair<Index, Disturbance>> steps;
    for (const auto& d : disturbances) {
        const auto it = std::find(model.bus_ids.begin(), model.bus_ids.end(), d.bus);
        if (it == model.bus_ids.end()) {
            throw NetworkError("disturbance at unknown bus " + std::to_string(d.bus));
        }
        steps.emplace_back(static_cast<Index>(it - model.bus_ids.begin()), d);
    }
    auto input = [&](double t) {
        Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
        for (const auto& [idx, d] : steps) {
            if (t >= d.time - 1e-12) {
                p(idx) += d.magnitude;
            }
        }
        return p;
    };

    const auto n_steps = static_cast<long>(std::llround(opts.t_end / opts.dt));
    const Index N = r.states();
    const MatrixXd I = MatrixXd::Identity(N, N);
    const Eigen::PartialPivLU<MatrixXd> lhs(I - 0.5 * opts.dt * r.A);
    const MatrixXd rhs = I + 0.5 * opts.dt * r.A;
    const MatrixXd Bh = 0.5 * opts.dt * r.B;

    SimulationResult res;
    res.bus_ids = model.bus_ids;
    const long n_rec = n_steps / opts.record_every + 1;
    res.omega.resize(n_rec, n);
    res.z.resize(n_rec, n);
    res.t.reserve(static_cast<std::size_t>(n_rec));

    Eigen::VectorXd x = Eigen::VectorXd::Zero(N);
    Eigen::VectorXd p = input(0.0);
    long row = 0;
    for (long k = 0; k <= n_steps; ++k) {
        const double t = static_cast<double>(k) * opts.dt;
        const Eigen::VectorXd w = r.omega.x * x + r.omega.p * p;
        const Eigen::VectorXd zz = r.z.x * x + r.z.p * p;
        const double peak = std::max(w.cwiseAbs().maxCoeff(), zz.size() ? zz.cwiseAbs().maxCoeff() : 0.0);
        if (!std::isfinite(peak) || peak > 1e6) {
            std::ostringstream os;
            os << "trace magnitude " << peak << " exceeds 1e6 at t = " << t << " s; simulation aborted as diverged";
            throw SimulationDivergedError(os.str(), t);
        }
        if (k % opts.record_every == 0 && row < n_rec) {
            res.t.push_back(t);
            res.omega.row(row) = w.transpose();
            res.z.row(row) = zz.transpose();
            ++row;
        }
        if (k == n_steps) {
            break;
        }
        const Eigen::VectorXd p_next = input(static_cast<double>(k + 1) * opts.dt);
        if (N > 0) {
            x = lhs.solve(rhs * x + Bh * (p + p_next));
        }
        p = p_next;
    }
    res.omega.conservativeResize(row, n);
    res.z.conservativeResize(row, n);

    const double to_hz = model.angle_scale / (2.0 * std::numbers::pi);
    res.f_hz = res.omega * to_hz;
    res.f_bar = res.f_hz.rowwise().mean();
    res.f_dev = res.f_hz.colwise() - res.f_bar;
    return res;
}

}  // namespace hybridstab
