#include "hybridstab/ratfun.hpp"

#include "hybridstab/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hybridstab {

namespace {

constexpr double kPoleProximityTol = 1e-10;

double root_tol(Complex r) {
    return kRootMatchTol * (1.0 + std::abs(r));
}

// Cancels common numerator/denominator roots in place.
void cancel_common_roots(Polynomial& num, Polynomial& den) {
    if (num.degree() == 0 || den.degree() == 0) {
        return;
    }
    const std::vector<Complex> nr = num.roots();
    std::vector<Complex> dr = den.roots();
    std::vector<bool> used(dr.size(), false);

    auto closest_unused = [&](Complex target) -> std::optional<std::size_t> {
        std::optional<std::size_t> best;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < dr.size(); ++i) {
            if (used[i]) {
                continue;
            }
            const double d = std::abs(dr[i] - target);
            if (d < best_dist) {
                best_dist = d;
                best = i;
            }
        }
        if (best && best_dist <= root_tol(target)) {
            return best;
        }
        return std::nullopt;
    };

    std::vector<Polynomial> factors;
    for (const Complex& r : nr) {
        if (r.imag() < -root_tol(r)) {
            continue;  // handled together with its conjugate
        }
        const auto match = closest_unused(r);
        if (!match) {
            continue;
        }
        used[*match] = true;
        const Complex d = dr[*match];
        const Complex mid = 0.5 * (r + d);
        if (std::abs(r.imag()) <= root_tol(r) || std::abs(d.imag()) <= root_tol(d)) {
            factors.push_back(Polynomial({-mid.real(), 1.0}));
            continue;
        }
        const auto conj_match = closest_unused(std::conj(d));
        if (!conj_match) {
            continue;
        }
        used[*conj_match] = true;
        factors.push_back(Polynomial({std::norm(mid), -2.0 * mid.real(), 1.0}));
    }
    for (const Polynomial& f : factors) {
        if (f.degree() > num.degree() || f.degree() > den.degree()) {
            break;
        }
        num = num.divmod(f).first;
        den = den.divmod(f).first;
    }
}

}  // namespace

RationalFunction::RationalFunction(Polynomial numerator, Polynomial denominator)
    : num_(std::move(numerator)), den_(std::move(denominator)) {
    if (den_.is_zero()) {
        throw ZeroFunctionError("rational function with identically zero denominator");
    }
    if (num_.is_zero()) {
        den_ = Polynomial::constant(1.0);
    } else {
        cancel_common_roots(num_, den_);
    }
    const double lead = den_.leading();
    num_ = num_.scaled(1.0 / lead);
    den_ = den_.scaled(1.0 / lead);
    poles_ = den_.roots();
}

Complex RationalFunction::operator()(Complex s) const {
    double nearest = std::numeric_limits<double>::infinity();
    for (const Complex& p : poles_) {
        const double d = std::abs(s - p);
        nearest = std::min(nearest, d);
        if (d <= kPoleProximityTol * (1.0 + std::abs(p))) {
            std::ostringstream os;
            os << "evaluation at s=" << s << " is within " << d << " of pole " << p;
            throw NearPoleError(os.str(), d);
        }
    }
    const Complex dv = den_(s);
    if (dv == 0.0) {
        throw NearPoleError("denominator vanishes at evaluation point", nearest);
    }
    return num_(s) / dv;
}

std::optional<double> RationalFunction::value_at_zero() const {
    if (den_[0] == 0.0) {
        return std::nullopt;
    }
    return num_[0] / den_[0];
}

RationalFunction operator+(const RationalFunction& a, const RationalFunction& b) {
    if (a.den_ == b.den_) {
        return {a.num_ + b.num_, a.den_};
    }
    return {a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_};
}

RationalFunction operator-(const RationalFunction& a) {
    return {a.num_.scaled(-1.0), a.den_};
}

RationalFunction operator-(const RationalFunction& a, const RationalFunction& b) {
    return a + (-b);
}

RationalFunction operator*(const RationalFunction& a, const RationalFunction& b) {
    return {a.num_ * b.num_, a.den_ * b.den_};
}

RationalFunction inverse(const RationalFunction& f) {
    if (f.is_zero()) {
        throw ZeroFunctionError("cannot invert an identically zero rational function");
    }
    return {f.denominator(), f.numerator()};
}

RationalFunction feedback(const RationalFunction& a, const RationalFunction& b) {
    const Polynomial den = a.denominator() * b.denominator() - a.numerator() * b.numerator();
    if (den.is_zero()) {
        throw DegenerateFeedbackError("1 - a*b vanishes identically");
    }
    return {a.numerator() * b.denominator(), den};
}

bool equivalent(const RationalFunction& a, const RationalFunction& b, double tol) {
    const Polynomial lhs = a.numerator() * b.denominator();
    const Polynomial rhs = b.numerator() * a.denominator();
    double scale = 0.0;
    for (double c : lhs.coefficients()) {
        scale = std::max(scale, std::abs(c));
    }
    for (double c : rhs.coefficients()) {
        scale = std::max(scale, std::abs(c));
    }
    const int deg = std::max(lhs.degree(), rhs.degree());
    for (int k = 0; k <= deg; ++k) {
        if (std::abs(lhs[k] - rhs[k]) > tol * std::max(scale, 1e-300)) {
            return false;
        }
    }
    return true;
}

std::string RationalFunction::to_string() const {
    return "(" + num_.to_string() + ") / (" + den_.to_string() + ")";
}

HinfCertificate is_hinf_stable(const RationalFunction& f) {
    HinfCertificate cert;
    cert.proper = f.is_proper();
    if (!cert.proper) {
        cert.reason = "improper (relative degree " + std::to_string(f.relative_degree()) + ")";
        return cert;
    }
    for (const Complex& p : f.poles()) {
        if (p.real() < -kStabilityMarginTol) {
            continue;
        }
        cert.offending_pole = p;
        cert.marginal = std::abs(p.real()) <= kStabilityMarginTol;
        std::ostringstream os;
        os << (cert.marginal ? "marginal pole at " : "unstable pole at ") << p;
        cert.reason = os.str();
        return cert;
    }
    cert.stable = true;
    double peak = std::abs(f(Complex(0.0, 0.0)));
    constexpr int kPoints = 400;
    for (int i = 0; i < kPoints; ++i) {
        const double w = std::pow(10.0, -4.0 + 8.0 * i / (kPoints - 1));
        peak = std::max(peak, std::abs(f(Complex(0.0, w))));
    }
    cert.norm_estimate = peak;
    return cert;
}

Eigen::MatrixXcd StateSpace::frequency_response(Complex s) const {
    Eigen::MatrixXcd out = D.cast<Complex>() + s * E.cast<Complex>();
    if (A.rows() > 0) {
        const Eigen::Index n = A.rows();
        const Eigen::MatrixXcd pencil =
            s * Eigen::MatrixXcd::Identity(n, n) - A.cast<Complex>();
        out += C.cast<Complex>() * pencil.partialPivLu().solve(B.cast<Complex>());
    }
    return out;
}

StateSpace realize(const RationalFunction& f) {
    const int rd = f.relative_degree();
    if (rd < -1) {
        throw ImproperError("cannot realize a function improper by " + std::to_string(-rd) +
                            " degrees: " + f.to_string());
    }
    const Polynomial& den = f.denominator();  // monic
    const auto [quot, rem] = f.numerator().divmod(den);
    const int n = den.degree();

    StateSpace ss;
    ss.A = Eigen::MatrixXd::Zero(n, n);
    ss.B = Eigen::MatrixXd::Zero(n, 1);
    ss.C = Eigen::MatrixXd::Zero(1, n);
    ss.D = Eigen::MatrixXd::Constant(1, 1, quot[0]);
    ss.E = Eigen::MatrixXd::Constant(1, 1, quot[1]);
    for (int i = 0; i + 1 < n; ++i) {
        ss.A(i, i + 1) = 1.0;
    }
    for (int i = 0; i < n; ++i) {
        ss.A(n - 1, i) = -den[i];
        ss.C(0, i) = rem[i];
    }
    if (n > 0) {
        ss.B(n - 1, 0) = 1.0;
    }
    return ss;
}

}  // namespace hybridstab
