#include "hybridstab/stability.hpp"

#include "hybridstab/error.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

namespace hybridstab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

std::string fmt(Complex v) {
    std::ostringstream os;
    os.precision(6);
    os << v.real() << (v.imag() < 0 ? "-" : "+") << std::abs(v.imag()) << "j";
    return os.str();
}

Complex safe_eval(const RationalFunction& f, Complex s) {
    try {
        return f(s);
    } catch (const NearPoleError&) {
        return {kNaN, kNaN};
    }
}

// N(jw) = A(w) + j B(w) for a real polynomial N.
std::pair<Polynomial, Polynomial> axis_parts(const Polynomial& p) {
    std::vector<double> re(static_cast<std::size_t>(p.degree()) + 1, 0.0);
    std::vector<double> im(re.size(), 0.0);
    for (int k = 0; k <= p.degree(); ++k) {
        const double sign = (k / 2) % 2 == 0 ? 1.0 : -1.0;
        if (k % 2 == 0) {
            re[static_cast<std::size_t>(k)] = sign * p[k];
        } else {
            im[static_cast<std::size_t>(k)] = sign * p[k];
        }
    }
    return {Polynomial(re), Polynomial(im)};
}

// Even polynomial in w rewritten in u = w^2.
std::vector<double> even_to_u(const Polynomial& p) {
    std::vector<double> out;
    for (int k = 0; k <= p.degree(); k += 2) {
        out.push_back(p[k]);
    }
    return out;
}

// Re(N conj D)(jw) and |D(jw)|^2, both as coefficient lists in u = w^2.
std::pair<std::vector<double>, std::vector<double>> real_part_polys(const RationalFunction& f) {
    const auto [an, bn] = axis_parts(f.numerator());
    const auto [ad, bd] = axis_parts(f.denominator());
    return {even_to_u(an * ad + bn * bd), even_to_u(ad * ad + bd * bd)};
}

std::size_t lowest_order(const std::vector<double>& c) {
    double scale = 0.0;
    for (double v : c) {
        scale = std::max(scale, std::abs(v));
    }
    for (std::size_t k = 0; k < c.size(); ++k) {
        if (std::abs(c[k]) > 1e-13 * scale) {
            return k;
        }
    }
    return c.size();
}

struct Sample {
    double omega = 0.0;
    std::vector<double> xi;
    std::vector<double> xi_scale;
    double avg_xi = 0.0;
    double avg_scale = 0.0;
    std::vector<double> kbar_re;
    std::vector<double> kbar_scale;
    double delta = 0.0;
    std::size_t delta_sub = 0;
    double min_xi = 0.0;
    std::size_t min_xi_bus = 0;
    double lhs = 0.0;  // proof form of 2.3
    double rhs = 0.0;
    double lhs_disp = 0.0;  // displayed form of 2.3
    double rhs_disp = 0.0;
    double herm_min = kNaN;
    double combined = kInf;
};

double rel(double v, double scale) {
    if (std::isnan(v)) {
        return -kInf;
    }
    return v / std::max(std::min(1.0, scale), 1e-300);
}

class Evaluator {
public:
    Evaluator(const NetworkCase& net, const AnalysisOptions& opts)
        : opts_(opts), lap_(build_laplacians(net)), threads_(worker_threads(opts.threads)) {
        for (const auto& b : net.buses) {
            buses_.push_back(b.model);
        }
        for (const auto& sub : lap_.subnetworks) {
            lam_min_.push_back(sub.lambda_min);
        }
    }

    [[nodiscard]] const LaplacianSet& laplacians() const { return lap_; }
    [[nodiscard]] const std::vector<BusModel>& buses() const { return buses_; }
    [[nodiscard]] unsigned threads() const { return threads_; }

    [[nodiscard]] Sample evaluate(double w, bool with_herm) const {
        const Complex s(0.0, w);
        Sample out;
        out.omega = w;
        const std::size_t n = buses_.size();
        out.xi.resize(n);
        out.xi_scale.resize(n);
        Complex avg(0.0, 0.0);
        out.min_xi = kInf;
        for (std::size_t i = 0; i < n; ++i) {
            const Complex f = safe_eval(buses_[i].gk_inv, s);
            out.xi[i] = f.real();
            out.xi_scale[i] = std::abs(f);
            avg += f;
            if (!(f.real() >= out.min_xi)) {
                out.min_xi = f.real();
                out.min_xi_bus = i;
            }
        }
        avg /= static_cast<double>(n);
        out.avg_xi = avg.real();
        out.avg_scale = std::abs(avg);

        const auto& subs = lap_.subnetworks;
        out.kbar_re.resize(subs.size());
        out.kbar_scale.resize(subs.size());
        double min_kl = kInf;
        double min_kl_disp = kInf;
        for (std::size_t j = 0; j < subs.size(); ++j) {
            Complex mean(0.0, 0.0);
            std::vector<Complex> vals;
            for (auto idx : subs[j].nodes) {
                vals.push_back(safe_eval(buses_[idx].k_inv, s));
                mean += vals.back();
            }
            mean /= static_cast<double>(vals.size());
            double dev = 0.0;
            for (const auto& v : vals) {
                dev = std::max(dev, std::abs(v - mean));
            }
            out.kbar_re[j] = mean.real();
            out.kbar_scale[j] = std::abs(mean);
            if (dev > out.delta || std::isnan(dev)) {
                out.delta = dev;
                out.delta_sub = j;
            }
            min_kl = std::min(min_kl, mean.real() * lam_min_[j]);
            min_kl_disp = std::min(min_kl_disp, mean.real() * lam_min_[j] / lap_.lambda_dc_max);
        }
        if (!subs.empty()) {
            const double lmax = lap_.lambda_dc_max;
            out.lhs = 4.0 * out.min_xi * min_kl;
            out.rhs = (lmax * out.delta) * (lmax * out.delta);
            out.lhs_disp = 4.0 * out.min_xi * min_kl_disp;
            out.rhs_disp = lmax * out.delta * out.delta;
        }

        out.combined = kInf;
        for (std::size_t i = 0; i < n; ++i) {
            out.combined = std::min(out.combined, rel(out.xi[i], out.xi_scale[i]));
        }
        out.combined = std::min(out.combined, rel(out.avg_xi, out.avg_scale));
        for (std::size_t j = 0; j < subs.size(); ++j) {
            out.combined = std::min(out.combined, rel(out.kbar_re[j], out.kbar_scale[j]));
        }
        if (!subs.empty()) {
            out.combined = std::min(out.combined, rel(out.lhs - out.rhs, out.lhs + out.rhs));
        }

        if (with_herm) {
            try {
                out.herm_min = hermitian_part_min(h_inverse(buses_, lap_, s));
            } catch (const NearPoleError&) {
                out.herm_min = kNaN;
            }
        }
        return out;
    }

    [[nodiscard]] std::vector<Sample> evaluate_all(const std::vector<double>& omegas, bool with_herm) const {
        std::vector<Sample> out(omegas.size());
        detail::parallel_for(omegas.size(), threads_,
                             [&](std::size_t i) { out[i] = evaluate(omegas[i], with_herm); });
        return out;
    }

    // Golden-section search for the smallest combined margin in log w.
    void refine(std::vector<Sample>& samples, bool with_herm) const {
        std::sort(samples.begin(), samples.end(),
                  [](const Sample& a, const Sample& b) { return a.omega < b.omega; });
        const std::size_t m = samples.size();
        if (m < 3 || opts_.refine_count <= 0) {
            return;
        }
        std::vector<std::size_t> minima;
        for (std::size_t k = 0; k < m; ++k) {
            const double c = samples[k].combined;
            const bool left = k == 0 || c <= samples[k - 1].combined;
            const bool right = k + 1 == m || c <= samples[k + 1].combined;
            if (left && right && std::isfinite(c)) {
                minima.push_back(k);
            }
        }
        std::stable_sort(minima.begin(), minima.end(), [&](std::size_t a, std::size_t b) {
            return samples[a].combined < samples[b].combined;
        });
        if (minima.size() > static_cast<std::size_t>(opts_.refine_count)) {
            minima.resize(static_cast<std::size_t>(opts_.refine_count));
        }

        std::vector<std::vector<Sample>> extra(minima.size());
        const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
        detail::parallel_for(minima.size(), threads_, [&](std::size_t q) {
            const std::size_t k = minima[q];
            double lo = std::log(k > 0 ? samples[k - 1].omega : samples[k].omega / 2.0);
            double hi = std::log(k + 1 < m ? samples[k + 1].omega : samples[k].omega * 2.0);
            auto eval = [&](double x) {
                extra[q].push_back(evaluate(std::exp(x), with_herm));
                return extra[q].back().combined;
            };
            double x1 = hi - phi * (hi - lo);
            double x2 = lo + phi * (hi - lo);
            double f1 = eval(x1);
            double f2 = eval(x2);
            for (int it = 0; it < 200 && hi - lo > opts_.refine_rel; ++it) {
                if (f1 <= f2) {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - phi * (hi - lo);
                    f1 = eval(x1);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + phi * (hi - lo);
                    f2 = eval(x2);
                }
            }
        });
        for (auto& e : extra) {
            samples.insert(samples.end(), e.begin(), e.end());
        }
        std::sort(samples.begin(), samples.end(),
                  [](const Sample& a, const Sample& b) { return a.omega < b.omega; });
    }

private:
    AnalysisOptions opts_;
    LaplacianSet lap_;
    std::vector<BusModel> buses_;
    std::vector<double> lam_min_;
    unsigned threads_;
};

// Keeps the worst classified sample; ties go to the smaller frequency.
struct Tracker {
    Verdict verdict = Verdict::Pass;
    double worst_rel = kInf;
    double margin = kInf;
    std::optional<double> omega;
    std::size_t who = 0;
    bool seen = false;

    void add(double v, double scale, double w, std::size_t idx) {
        const Verdict vd = classify_positive(v, scale);
        const double r = rel(v, scale);
        verdict = worst(verdict, vd);
        if (!seen || r < worst_rel || (r == worst_rel && w < omega.value_or(kInf))) {
            seen = true;
            worst_rel = r;
            margin = v;
            omega = w;
            who = idx;
        }
    }
};

std::vector<Complex> sdelta_points(const AnalysisOptions& opts) {
    std::vector<Complex> out;
    const int nr = std::max(2, opts.sdelta_radii);
    const int na = std::max(2, opts.sdelta_angles);
    for (int a = 0; a < nr; ++a) {
        const double r = opts.delta * std::pow(10.0, -3.0 + 3.0 * a / (nr - 1));
        for (int b = 0; b < na; ++b) {
            const double th = -std::numbers::pi / 2 + std::numbers::pi * b / (na - 1);
            out.push_back(std::polar(r, th));
        }
    }
    return out;
}

ConditionResult make_result(const char* id) {
    ConditionResult r;
    r.id = id;
    return r;
}

}  // namespace

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass:
            return "PASS";
        case Verdict::Marginal:
            return "MARGINAL";
        case Verdict::Fail:
            return "FAIL";
    }
    return "FAIL";
}

Verdict worst(Verdict a, Verdict b) {
    return static_cast<int>(a) >= static_cast<int>(b) ? a : b;
}

Verdict classify_positive(double v, double scale) {
    if (!(v > 0.0)) {
        return Verdict::Fail;
    }
    const double floor = kStrictnessTol * std::min(1.0, std::isfinite(scale) ? scale : 1.0);
    return v >= floor ? Verdict::Pass : Verdict::Marginal;
}

unsigned worker_threads(unsigned requested) {
    unsigned n = requested;
    if (n == 0) {
        n = std::max(1u, std::thread::hardware_concurrency());
    }
    if (const char* env = std::getenv("HYBRIDSTAB_THREADS")) {
        unsigned cap = 0;
        const char* end = env + std::char_traits<char>::length(env);
        const auto [ptr, ec] = std::from_chars(env, end, cap);
        if (ec == std::errc() && ptr == end && cap > 0) {
            n = std::min(n, cap);
        }
    }
    return n;
}

FrequencyGrid FrequencyGrid::log_spaced(double wmin, double wmax, int points, double delta) {
    if (!(wmin > 0.0) || !(wmax > wmin) || points < 2) {
        throw Error("frequency grid needs 0 < min < max and at least 2 points");
    }
    FrequencyGrid g;
    g.delta = delta;
    g.omega.reserve(static_cast<std::size_t>(points));
    const double a = std::log10(wmin);
    const double b = std::log10(wmax);
    for (int i = 0; i < points; ++i) {
        g.omega.push_back(std::pow(10.0, a + (b - a) * i / (points - 1)));
    }
    return g;
}

const ConditionResult& StabilityReport::condition(std::string_view id) const {
    for (const auto& c : conditions) {
        if (c.id == id) {
            return c;
        }
    }
    throw Error("no condition " + std::string(id) + " in report");
}

double real_part_limit_at_zero(const RationalFunction& f) {
    const auto [p, q] = real_part_polys(f);
    const std::size_t a = lowest_order(p);
    const std::size_t b = lowest_order(q);
    if (a >= p.size()) {
        return 0.0;
    }
    if (a > b) {
        return 0.0;
    }
    if (a == b) {
        return p[a] / q[b];
    }
    return p[a] > 0 ? kInf : -kInf;
}

AxisAnalysis analyze_real_part(const RationalFunction& f) {
    AxisAnalysis out;
    std::ostringstream why;
    for (const Complex& pole : f.poles()) {
        if (pole.real() > kStabilityMarginTol) {
            out.analytic = false;
            why << "RHP pole at " << fmt(pole);
            break;
        }
        if (pole.real() < -kStabilityMarginTol) {
            continue;
        }
        if (std::abs(pole) > kRootMatchTol) {
            out.analytic = false;
            why << "imaginary-axis pole at " << fmt(pole);
            break;
        }
    }
    if (out.analytic) {
        const int m = f.denominator().zero_root_multiplicity();
        if (m > 1) {
            out.analytic = false;
            why << "pole of order " << m << " at the origin";
        } else if (m == 1) {
            const auto [d1, rem] = f.denominator().divmod(Polynomial({0.0, 1.0}));
            const double residue = f.numerator()[0] / d1[0];
            if (!(residue > 0.0)) {
                out.analytic = false;
                why << "pole at the origin with residue " << fmt(residue);
            }
        }
    }

    const int rd = f.relative_degree();
    const double lead = f.numerator().leading() / f.denominator().leading();
    if (rd >= 2 || rd <= -2) {
        out.infinity_ok = false;
        if (why.tellp() > 0) {
            why << "; ";
        }
        why << "relative degree " << rd << " makes the real part change sign as |s| -> inf";
    } else if (!(lead > 0.0)) {
        out.infinity_ok = false;
        if (why.tellp() > 0) {
            why << "; ";
        }
        why << "leading coefficient ratio " << fmt(lead) << " is not positive";
    }
    out.reason = why.str();

    const auto [p, q] = real_part_polys(f);
    (void)q;
    const Polynomial pu{std::vector<double>(p)};
    if (!pu.is_zero() && pu.degree() > 0) {
        std::vector<double> roots;
        for (const Complex& r : pu.roots()) {
            if (r.real() > 0.0 && std::abs(r.imag()) <= kRootMatchTol * (1.0 + std::abs(r))) {
                roots.push_back(std::sqrt(r.real()));
            }
        }
        std::sort(roots.begin(), roots.end());
        if (!roots.empty()) {
            out.witnesses.push_back(roots.front() / 2.0);
            for (std::size_t k = 0; k < roots.size(); ++k) {
                out.witnesses.push_back(roots[k]);
                if (k + 1 < roots.size()) {
                    out.witnesses.push_back(std::sqrt(roots[k] * roots[k + 1]));
                }
            }
            out.witnesses.push_back(roots.back() * 2.0);
        }
    }
    out.limit_at_zero = real_part_limit_at_zero(f);
    return out;
}

CoherencyQuantities coherency_quantities(const std::vector<BusModel>& buses,
                                         const std::vector<DcSubnetwork>& subnetworks, Complex s) {
    CoherencyQuantities out;
    out.kbar_bus.resize(buses.size());
    for (std::size_t i = 0; i < buses.size(); ++i) {
        out.kbar_bus[i] = buses[i].k_inv(s);
    }
    for (const auto& sub : subnetworks) {
        Complex mean(0.0, 0.0);
        for (auto idx : sub.nodes) {
            mean += buses.at(idx).k_inv(s);
        }
        mean /= static_cast<double>(sub.nodes.size());
        double dev = 0.0;
        for (auto idx : sub.nodes) {
            dev = std::max(dev, std::abs(buses[idx].k_inv(s) - mean));
            out.kbar_bus[idx] = mean;
        }
        out.kbar_inv.push_back(mean);
        out.delta_j.push_back(dev);
        out.delta = std::max(out.delta, dev);
    }
    out.min_xi = kInf;
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const double xi = bus_xi(buses[i], s);
        if (xi < out.min_xi) {
            out.min_xi = xi;
            out.min_xi_bus = i;
        }
    }
    return out;
}

Eigen::MatrixXcd h_inverse(const std::vector<BusModel>& buses, const LaplacianSet& lap, Complex s) {
    const auto n = static_cast<Eigen::Index>(buses.size());
    Eigen::VectorXcd kinv(n);
    Eigen::MatrixXcd out = lap.L_ac.cast<Complex>() / s;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& b = buses[static_cast<std::size_t>(i)];
        out(i, i) += b.gk_inv(s);
        kinv(i) = b.k_inv(s);
    }
    out += lap.L_dc.cast<Complex>() * kinv.asDiagonal();
    return out;
}

double hermitian_part_min(const Eigen::MatrixXcd& m) {
    const Eigen::MatrixXcd herm = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

bool schur_matrix_positive_definite(double a, double b, double c) {
    Eigen::Matrix2d m;
    m << a, -0.5 * b, -0.5 * b, c;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() > 0.0;
}

Lemma1Result lemma1_bound(const Eigen::MatrixXcd& h_inv, double kappa) {
    if (h_inv.rows() != h_inv.cols()) {
        throw Error("sigma bound needs a square matrix");
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h_inv);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(sv.size() - 1) <= 1e-14 * std::max(1.0, sv(0))) {
        throw SingularMatrixError("H^{-1} is singular");
    }
    Lemma1Result out;
    out.lambda_min = hermitian_part_min(h_inv);
    out.premise = out.lambda_min >= 1.0 / kappa;
    out.sigma_max = 1.0 / sv(sv.size() - 1);
    out.conclusion = out.sigma_max <= kappa * (1.0 + 1e-10);
    return out;
}

Lemma2Result lemma2_bound(const Eigen::MatrixXd& M, const Eigen::VectorXcd& d, const Eigen::VectorXcd& x,
                          const Eigen::VectorXcd& y, double slack) {
    const Eigen::Index n = M.rows();
    if (M.cols() != n || d.size() != n || x.size() != n || y.size() != n) {
        throw Error("bilinear bound operands have inconsistent sizes");
    }
    const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
    const double mscale = std::max(1.0, M.cwiseAbs().maxCoeff());
    if (asym > 1e-12 * mscale) {
        throw NotPsdError("M is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-12 * mscale) {
        throw NotPsdError("M has a negative eigenvalue " + fmt(es.eigenvalues().minCoeff()));
    }
    Lemma2Result out;
    out.lhs = (y.adjoint() * M.cast<Complex>() * d.asDiagonal() * x)(0, 0).real();
    out.rhs = x.norm() * y.norm() * std::max(0.0, es.eigenvalues().maxCoeff()) * d.cwiseAbs().maxCoeff();
    out.holds = out.lhs <= out.rhs + slack * std::max(1.0, out.rhs);
    return out;
}

namespace {

StabilityReport run_checks(const NetworkCase& net, const AnalysisOptions& opts, const FrequencyGrid& grid,
                           bool full) {
    if (net.buses.empty()) {
        throw NetworkError("network has no buses");
    }
    if (net.has_passive_buses()) {
        throw NetworkError("case contains passive buses; Kron-reduce them first (kron command or --auto-kron)");
    }
    const Evaluator ev(net, opts);
    const auto& buses = ev.buses();
    const auto& lap = ev.laplacians();
    const std::size_t n = buses.size();

    StabilityReport rep;
    rep.delta = grid.delta;

    // Exact per-bus screening.
    std::vector<AxisAnalysis> axis(n);
    std::vector<double> omegas = grid.omega;
    for (std::size_t i = 0; i < n; ++i) {
        axis[i] = analyze_real_part(buses[i].gk_inv);
        for (double w : axis[i].witnesses) {
            if (w > 0.0 && std::isfinite(w)) {
                omegas.push_back(w);
            }
        }
    }
    std::sort(omegas.begin(), omegas.end());
    omegas.erase(std::unique(omegas.begin(), omegas.end()), omegas.end());

    std::vector<Sample> samples = ev.evaluate_all(omegas, full);
    if (full) {
        ev.refine(samples, true);
    }
    rep.samples = samples.size();

    // S_delta samples.
    AnalysisOptions sd_opts = opts;
    sd_opts.delta = grid.delta;
    const std::vector<Complex> sdelta = sdelta_points(sd_opts);

    // Condition 1.1 - 1.3 per bus.
    for (std::size_t i = 0; i < n; ++i) {
        const BusModel& b = buses[i];
        BusCondition1 bc;
        bc.bus = net.buses[i].id;
        bc.kind = b.kind;

        bc.c11 = make_result("1.1");
        const HinfCertificate cert = is_hinf_stable(b.k_inv);
        if (cert.stable) {
            bc.c11.margin = cert.norm_estimate;
            bc.c11.detail = "k^{-1} stable, |k^{-1}|_inf ~ " + fmt(cert.norm_estimate);
        } else {
            bc.c11.verdict = Verdict::Fail;
            bc.c11.margin = cert.offending_pole ? cert.offending_pole->real() : 0.0;
            if (cert.offending_pole) {
                bc.c11.worst_omega = std::abs(cert.offending_pole->imag());
            }
            bc.c11.detail = "k^{-1} not H-infinity stable: " + cert.reason;
            bc.c11.culprit_bus = bc.bus;
        }

        bc.c12 = make_result("1.2");
        std::optional<Complex> bad_zero;
        for (const Complex& z : b.g.zeros()) {
            if (std::abs(z) <= grid.delta * (1.0 + 1e-12) && z.real() >= -kStabilityMarginTol) {
                bad_zero = z;
                break;
            }
        }
        if (bad_zero) {
            bc.c12.verdict = Verdict::Fail;
            bc.c12.margin = kInf;
            bc.c12.worst_omega = std::abs(bad_zero->imag());
            bc.c12.culprit_bus = bc.bus;
            bc.c12.detail = "g has a zero at " + fmt(*bad_zero) + " inside S_delta, |g^{-1}| unbounded";
        } else {
            const RationalFunction g_inv = inverse(b.g);
            double cmax = std::abs(g_inv.value_at_zero().value_or(0.0));
            double wmax = 0.0;
            for (const Complex& s : sdelta) {
                const double v = std::abs(safe_eval(g_inv, s));
                if (v > cmax) {
                    cmax = v;
                    wmax = std::abs(s);
                }
            }
            bc.c12.margin = cmax;
            bc.c12.worst_omega = wmax;
            bc.c12.detail = "max |g^{-1}| on S_delta = " + fmt(cmax);
            rep.c = std::max(rep.c, cmax);
        }

        bc.c13 = make_result("1.3");
        bc.xi_at_zero = axis[i].limit_at_zero;
        Tracker t;
        for (const auto& smp : samples) {
            t.add(smp.xi[i], smp.xi_scale[i], smp.omega, i);
        }
        bc.c13.verdict = t.verdict;
        bc.c13.margin = t.margin;
        bc.c13.worst_omega = t.omega;
        if (!axis[i].analytic || !axis[i].infinity_ok) {
            bc.c13.verdict = Verdict::Fail;
            bc.c13.detail = axis[i].reason;
        } else if (t.verdict == Verdict::Fail) {
            bc.c13.detail = "xi(jw) = " + fmt(t.margin) + " at w = " + fmt(*t.omega) + " rad/s";
        } else {
            bc.c13.detail = "min xi(jw) = " + fmt(t.margin) + " at w = " + fmt(t.omega.value_or(0.0)) + " rad/s";
        }
        if (bc.c13.verdict != Verdict::Pass) {
            bc.c13.culprit_bus = bc.bus;
        }
        rep.per_bus.push_back(std::move(bc));
    }

    auto aggregate = [&](const char* id, auto pick) {
        ConditionResult r = make_result(id);
        r.margin = kInf;
        bool first = true;
        double worst_rel = kInf;
        for (const auto& bc : rep.per_bus) {
            const ConditionResult& c = pick(bc);
            const int sev = static_cast<int>(c.verdict);
            const int cur = static_cast<int>(r.verdict);
            const double cr = c.margin;
            if (first || sev > cur || (sev == cur && cr < worst_rel)) {
                const Verdict keep = worst(r.verdict, c.verdict);
                r = c;
                r.verdict = keep;
                r.culprit_bus = bc.bus;
                worst_rel = cr;
                first = false;
            }
        }
        if (r.verdict == Verdict::Pass) {
            r.detail = "all buses";
        }
        return r;
    };
    rep.conditions.push_back(aggregate("1.1", [](const BusCondition1& b) -> const ConditionResult& { return b.c11; }));
    {
        // 1.2 is worst where |g^{-1}| is largest, so rank by the negated bound.
        ConditionResult r = make_result("1.2");
        double best = -kInf;
        for (const auto& bc : rep.per_bus) {
            const bool more_severe = static_cast<int>(bc.c12.verdict) > static_cast<int>(r.verdict);
            const bool same = bc.c12.verdict == r.verdict;
            if (more_severe || (same && bc.c12.margin > best)) {
                r = bc.c12;
                r.culprit_bus = bc.bus;
                best = bc.c12.margin;
            }
        }
        rep.conditions.push_back(r);
    }
    {
        ConditionResult r = make_result("1.3");
        double worst_rel = kInf;
        bool first = true;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& c = rep.per_bus[i].c13;
            const double cr = c.worst_omega ? rel(c.margin, 1.0) : -kInf;
            const bool more_severe = static_cast<int>(c.verdict) > static_cast<int>(r.verdict);
            const bool same = c.verdict == r.verdict;
            if (first || more_severe || (same && cr < worst_rel)) {
                r = c;
                r.culprit_bus = rep.per_bus[i].bus;
                worst_rel = cr;
                first = false;
            }
        }
        if (r.verdict == Verdict::Pass) {
            r.culprit_bus.reset();
        }
        rep.conditions.push_back(r);
    }
    for (auto& c : rep.conditions) {
        if (c.verdict == Verdict::Pass) {
            c.culprit_bus.reset();
        }
    }

    // 1.4: average xi on the axis, on S_delta and in the s -> 0 limit.
    {
        ConditionResult r = make_result("1.4");
        Tracker t;
        for (const auto& smp : samples) {
            t.add(smp.avg_xi, smp.avg_scale, smp.omega, smp.min_xi_bus);
        }
        double lim = 0.0;
        bool pos_inf = false;
        bool neg_inf = false;
        double scale0 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double l = axis[i].limit_at_zero;
            pos_inf = pos_inf || l == kInf;
            neg_inf = neg_inf || l == -kInf;
            if (std::isfinite(l)) {
                lim += l;
            }
            const auto v0 = buses[i].gk_inv.value_at_zero();
            scale0 += v0 ? std::abs(*v0) : 1.0;
        }
        lim /= static_cast<double>(n);
        scale0 /= static_cast<double>(n);
        std::size_t lim_bus = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (axis[i].limit_at_zero < axis[lim_bus].limit_at_zero) {
                lim_bus = i;
            }
        }
        const double lim_value = neg_inf ? -kInf : (pos_inf ? kInf : lim);
        if (std::isfinite(lim_value)) {
            t.add(lim_value, scale0, 0.0, lim_bus);
        } else {
            t.add(lim_value > 0 ? 1.0 : -1.0, 1.0, 0.0, lim_bus);
        }
        for (const Complex& s : sdelta) {
            Complex avg(0.0, 0.0);
            for (const auto& b : buses) {
                avg += safe_eval(b.gk_inv, s);
            }
            avg /= static_cast<double>(n);
            t.add(avg.real(), std::abs(avg), std::abs(s), lim_bus);
        }
        r.verdict = t.verdict;
        r.margin = t.margin;
        r.worst_omega = t.omega;
        if (r.verdict != Verdict::Pass) {
            r.culprit_bus = net.buses[t.who].id;
        }
        r.detail = "average xi at s->0 = " + fmt(lim_value) + ", worst average xi = " + fmt(t.margin);
        rep.conditions.push_back(r);
    }

    // Condition 2.
    const auto& subs = lap.subnetworks;
    ConditionResult c21 = make_result("2.1");
    ConditionResult c22 = make_result("2.2");
    ConditionResult c23 = make_result("2.3");
    if (subs.empty()) {
        for (auto* c : {&c21, &c22, &c23}) {
            c->detail = "no DC subnetworks";
        }
        rep.c1 = 0.0;
        rep.c2 = 0.0;
    } else {
        // 2.1
        Tracker t21;
        for (const auto& smp : samples) {
            for (std::size_t j = 0; j < subs.size(); ++j) {
                t21.add(smp.kbar_re[j], smp.kbar_scale[j], smp.omega, j);
            }
        }
        double c1 = kInf;
        std::size_t c1_sub = 0;
        for (std::size_t j = 0; j < subs.size(); ++j) {
            double lim = 0.0;
            bool pos_inf = false;
            bool neg_inf = false;
            double scale = 0.0;
            for (auto idx : subs[j].nodes) {
                const double l = real_part_limit_at_zero(buses[idx].k_inv);
                pos_inf = pos_inf || l == kInf;
                neg_inf = neg_inf || l == -kInf;
                if (std::isfinite(l)) {
                    lim += l;
                }
                const auto v0 = buses[idx].k_inv.value_at_zero();
                scale += v0 ? std::abs(*v0) : 1.0;
            }
            lim /= static_cast<double>(subs[j].nodes.size());
            scale /= static_cast<double>(subs[j].nodes.size());
            const double lv = neg_inf ? -kInf : (pos_inf ? kInf : lim);
            if (std::isfinite(lv)) {
                t21.add(lv, scale, 0.0, j);
            } else {
                t21.add(lv > 0 ? 1.0 : -1.0, 1.0, 0.0, j);
            }
            if (lv < c1) {
                c1 = lv;
                c1_sub = j;
            }
            for (const Complex& s : sdelta) {
                Complex mean(0.0, 0.0);
                for (auto idx : subs[j].nodes) {
                    mean += safe_eval(buses[idx].k_inv, s);
                }
                mean /= static_cast<double>(subs[j].nodes.size());
                t21.add(mean.real(), std::abs(mean), std::abs(s), j);
                if (mean.real() < c1 || std::isnan(mean.real())) {
                    c1 = mean.real();
                    c1_sub = j;
                }
            }
        }
        rep.c1 = c1;
        c21.verdict = t21.verdict;
        c21.margin = t21.margin;
        c21.worst_omega = t21.omega;
        if (c1 <= 0.0 || std::isnan(c1)) {
            c21.verdict = Verdict::Fail;
        }
        if (c21.verdict != Verdict::Pass) {
            c21.culprit_subnetwork = c1 <= 0.0 || std::isnan(c1) ? c1_sub : t21.who;
        }
        c21.detail = "min Re kbar^{-1} = " + fmt(t21.margin) + ", S_delta floor c1 = " + fmt(c1);

        // 2.2: Delta(0) must vanish exactly; c2 measured on S_delta.
        std::optional<std::size_t> bad_sub;
        std::string why22;
        for (std::size_t j = 0; j < subs.size() && !bad_sub; ++j) {
            std::vector<std::optional<double>> v0;
            for (auto idx : subs[j].nodes) {
                v0.push_back(buses[idx].k_inv.value_at_zero());
            }
            const bool any_pole = std::any_of(v0.begin(), v0.end(), [](const auto& v) { return !v; });
            if (any_pole) {
                const auto& first = buses[subs[j].nodes.front()].k_inv;
                for (auto idx : subs[j].nodes) {
                    if (!equivalent(first, buses[idx].k_inv)) {
                        bad_sub = j;
                        why22 = "k^{-1} has a pole at s=0 and members of the subnetwork differ";
                        break;
                    }
                }
            } else {
                double mean = 0.0;
                for (const auto& v : v0) {
                    mean += *v;
                }
                mean /= static_cast<double>(v0.size());
                for (const auto& v : v0) {
                    if (std::abs(*v - mean) > 1e-9 * std::max(1.0, std::abs(mean))) {
                        bad_sub = j;
                        c22.margin = std::abs(*v - mean);
                        why22 = "k_i^{-1}(0) differ inside the subnetwork, Delta(0) = " + fmt(std::abs(*v - mean));
                        break;
                    }
                }
            }
        }
        double c2 = 0.0;
        std::size_t c2_sub = 0;
        double c2_w = 0.0;
        for (const Complex& s : sdelta) {
            const auto q = coherency_quantities(buses, subs, s);
            for (std::size_t j = 0; j < subs.size(); ++j) {
                const double ratio = q.delta_j[j] / std::abs(s);
                if (ratio > c2 || std::isnan(ratio)) {
                    c2 = ratio;
                    c2_sub = j;
                    c2_w = std::abs(s);
                }
            }
        }
        rep.c2 = c2;
        if (bad_sub) {
            c22.verdict = Verdict::Fail;
            c22.culprit_subnetwork = *bad_sub;
            c22.worst_omega = 0.0;
            c22.detail = why22;
        } else {
            c22.margin = c2;
            c22.worst_omega = c2_w;
            c22.detail = "max Delta(s)/|s| on S_delta = " + fmt(c2);
            if (!std::isfinite(c2)) {
                c22.verdict = Verdict::Fail;
                c22.culprit_subnetwork = c2_sub;
            }
        }

        // 2.3 on the axis, s = 0 excluded.
        Tracker t23;
        for (const auto& smp : samples) {
            t23.add(smp.lhs - smp.rhs, smp.lhs + smp.rhs, smp.omega, smp.delta_sub);
            const Verdict proof = classify_positive(smp.lhs - smp.rhs, smp.lhs + smp.rhs);
            const Verdict shown = classify_positive(smp.lhs_disp - smp.rhs_disp, smp.lhs_disp + smp.rhs_disp);
            if (proof != shown) {
                rep.forms_23_agree = false;
            }
        }
        c23.verdict = t23.verdict;
        c23.margin = t23.margin;
        c23.worst_omega = t23.omega;
        if (c23.verdict != Verdict::Pass) {
            c23.culprit_subnetwork = t23.who;
        }
        c23.detail = "min (LHS - RHS) = " + fmt(t23.margin) + " at w = " + fmt(t23.omega.value_or(0.0)) +
                     " rad/s" + (rep.forms_23_agree ? "" : "; displayed and proof forms disagree");
    }
    rep.conditions.push_back(c21);
    rep.conditions.push_back(c22);
    rep.conditions.push_back(c23);

    rep.overall = Verdict::Pass;
    for (const auto& c : rep.conditions) {
        rep.overall = worst(rep.overall, c.verdict);
    }

    if (full) {
        double wmin = kInf;
        for (const auto& smp : samples) {
            if (std::isnan(smp.herm_min)) {
                wmin = -kInf;
                break;
            }
            wmin = std::min(wmin, smp.herm_min);
        }
        if (std::isfinite(wmin)) {
            rep.witness_min_herm = wmin;
            if (wmin > 0.0) {
                rep.kappa = 1.0 / wmin;
            }
        }
    }
    return rep;
}

}  // namespace

std::vector<BusCondition1> check_condition1(const NetworkCase& net, const FrequencyGrid& grid) {
    AnalysisOptions opts;
    opts.delta = grid.delta;
    return run_checks(net, opts, grid, false).per_bus;
}

StabilityReport certify(const NetworkCase& net, const AnalysisOptions& opts) {
    const FrequencyGrid grid = FrequencyGrid::log_spaced(opts.grid_min, opts.grid_max, opts.grid_points, opts.delta);
    return run_checks(net, opts, grid, true);
}

}  // namespace hybridstab
