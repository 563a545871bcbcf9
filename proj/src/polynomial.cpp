#include "hybridstab/error.hpp"
#include "hybridstab/ratfun.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hybridstab {

namespace {

// Coefficients below this fraction of the largest one are treated as
// cancellation residue when trimming the leading end.
constexpr double kTrimRelTol = 1e-14;

Complex eval_complex(const std::vector<double>& c, Complex s) {
    Complex acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) {
        acc = acc * s + *it;
    }
    return acc;
}

// A few guarded Newton steps on the original coefficients.
Complex polish_root(const Polynomial& p, const Polynomial& dp, Complex r) {
    Complex best = r;
    double best_res = std::abs(p(r));
    for (int it = 0; it < 4 && best_res > 0.0; ++it) {
        const Complex d = dp(best);
        if (d == 0.0) {
            break;
        }
        const Complex cand = best - p(best) / d;
        const double res = std::abs(p(cand));
        if (!(res < best_res)) {
            break;
        }
        best = cand;
        best_res = res;
    }
    return best;
}

}  // namespace

Polynomial::Polynomial(std::initializer_list<double> ascending) : coeffs_(ascending) {
    trim();
}

Polynomial::Polynomial(std::vector<double> ascending) : coeffs_(std::move(ascending)) {
    trim();
}

void Polynomial::trim() {
    if (coeffs_.empty()) {
        coeffs_.push_back(0.0);
        return;
    }
    double scale = 0.0;
    for (double c : coeffs_) {
        scale = std::max(scale, std::abs(c));
    }
    while (coeffs_.size() > 1 && std::abs(coeffs_.back()) <= kTrimRelTol * scale) {
        coeffs_.pop_back();
    }
    if (coeffs_.size() == 1 && std::abs(coeffs_[0]) == 0.0) {
        coeffs_[0] = 0.0;  // normalize -0.0
    }
}

Polynomial Polynomial::from_roots(const std::vector<Complex>& roots) {
    std::vector<Complex> acc{1.0};
    for (const Complex& r : roots) {
        std::vector<Complex> next(acc.size() + 1, 0.0);
        for (std::size_t k = 0; k < acc.size(); ++k) {
            next[k + 1] += acc[k];
            next[k] -= r * acc[k];
        }
        acc = std::move(next);
    }
    std::vector<double> real(acc.size());
    std::transform(acc.begin(), acc.end(), real.begin(), [](Complex c) { return c.real(); });
    return Polynomial(std::move(real));
}

Complex Polynomial::operator()(Complex s) const {
    return eval_complex(coeffs_, s);
}

double Polynomial::operator()(double s) const {
    double acc = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) {
        acc = acc * s + *it;
    }
    return acc;
}

int Polynomial::zero_root_multiplicity() const {
    if (is_zero()) {
        return 0;
    }
    int m = 0;
    while (coeffs_[m] == 0.0) {
        ++m;
    }
    return m;
}

std::vector<Complex> Polynomial::roots() const {
    std::vector<Complex> out;
    if (degree() <= 0) {
        return out;
    }
    const int m = zero_root_multiplicity();
    out.assign(m, Complex(0.0, 0.0));
    const std::vector<double> rest(coeffs_.begin() + m, coeffs_.end());
    const int n = static_cast<int>(rest.size()) - 1;
    if (n == 0) {
        return out;
    }
    if (n == 1) {
        out.emplace_back(-rest[0] / rest[1], 0.0);
        return out;
    }
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        companion(i, i - 1) = 1.0;
    }
    for (int i = 0; i < n; ++i) {
        companion(i, n - 1) = -rest[i] / rest[n];
    }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    const Polynomial reduced(rest);
    const Polynomial dreduced = reduced.derivative();
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
        Complex r = polish_root(reduced, dreduced, solver.eigenvalues()(i));
        if (std::abs(r.imag()) <= 1e-14 * (1.0 + std::abs(r))) {
            r.imag(0.0);
        }
        out.push_back(r);
    }
    return out;
}

Polynomial Polynomial::derivative() const {
    if (degree() == 0) {
        return Polynomial::constant(0.0);
    }
    std::vector<double> d(coeffs_.size() - 1);
    for (std::size_t k = 1; k < coeffs_.size(); ++k) {
        d[k - 1] = static_cast<double>(k) * coeffs_[k];
    }
    return Polynomial(std::move(d));
}

Polynomial Polynomial::scaled(double c) const {
    std::vector<double> out(coeffs_);
    for (double& v : out) {
        v *= c;
    }
    return Polynomial(std::move(out));
}

std::pair<Polynomial, Polynomial> Polynomial::divmod(const Polynomial& divisor) const {
    if (divisor.is_zero()) {
        throw ZeroFunctionError("polynomial division by zero");
    }
    const int dn = divisor.degree();
    if (degree() < dn) {
        return {Polynomial::constant(0.0), *this};
    }
    std::vector<double> rem(coeffs_);
    std::vector<double> quot(static_cast<std::size_t>(degree() - dn + 1), 0.0);
    const double lead = divisor.leading();
    for (int k = degree() - dn; k >= 0; --k) {
        const double q = rem[k + dn] / lead;
        quot[k] = q;
        for (int j = 0; j <= dn; ++j) {
            rem[k + j] -= q * divisor.coeffs_[j];
        }
        rem[k + dn] = 0.0;
    }
    rem.resize(static_cast<std::size_t>(std::max(dn, 1)));
    return {Polynomial(std::move(quot)), Polynomial(std::move(rem))};
}

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    std::vector<double> out(std::max(a.coeffs_.size(), b.coeffs_.size()), 0.0);
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = a[static_cast<int>(k)] + b[static_cast<int>(k)];
    }
    return Polynomial(std::move(out));
}

Polynomial operator-(const Polynomial& a, const Polynomial& b) {
    return a + b.scaled(-1.0);
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    if (a.is_zero() || b.is_zero()) {
        return Polynomial::constant(0.0);
    }
    std::vector<double> out(a.coeffs_.size() + b.coeffs_.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i) {
        for (std::size_t j = 0; j < b.coeffs_.size(); ++j) {
            out[i + j] += a.coeffs_[i] * b.coeffs_[j];
        }
    }
    return Polynomial(std::move(out));
}

std::string Polynomial::to_string(const char* var) const {
    std::ostringstream os;
    os.precision(6);
    bool first = true;
    for (int k = degree(); k >= 0; --k) {
        const double c = coeffs_[k];
        if (c == 0.0 && !(k == 0 && first)) {
            continue;
        }
        if (!first) {
            os << (c < 0 ? " - " : " + ");
        } else if (c < 0) {
            os << "-";
        }
        const double a = std::abs(c);
        if (k == 0 || a != 1.0) {
            os << a;
        }
        if (k >= 1) {
            os << var;
        }
        if (k >= 2) {
            os << "^" << k;
        }
        first = false;
    }
    return os.str();
}

}  // namespace hybridstab
