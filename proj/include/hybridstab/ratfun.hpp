#pragma once

// Real-coefficient rational functions in the Laplace variable s.

#include <complex>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hybridstab {

using Complex = std::complex<double>;

/// Polynomial with real coefficients stored in ascending degree.
/// The highest stored coefficient is nonzero unless the polynomial is zero,
/// in which case the coefficient list is {0}.
class Polynomial {
public:
    Polynomial() : coeffs_{0.0} {}
    Polynomial(std::initializer_list<double> ascending);
    explicit Polynomial(std::vector<double> ascending);

    static Polynomial constant(double c) { return Polynomial({c}); }
    /// Monic polynomial with the given roots; complex roots must come in
    /// conjugate pairs.
    static Polynomial from_roots(const std::vector<Complex>& roots);

    [[nodiscard]] const std::vector<double>& coefficients() const noexcept { return coeffs_; }
    [[nodiscard]] int degree() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }
    [[nodiscard]] bool is_zero() const noexcept { return coeffs_.size() == 1 && coeffs_[0] == 0.0; }
    [[nodiscard]] double leading() const noexcept { return coeffs_.back(); }
    [[nodiscard]] double operator[](int k) const {
        return k < static_cast<int>(coeffs_.size()) && k >= 0 ? coeffs_[k] : 0.0;
    }

    [[nodiscard]] Complex operator()(Complex s) const;
    [[nodiscard]] double operator()(double s) const;

    /// Roots via eigenvalues of the companion matrix.
    [[nodiscard]] std::vector<Complex> roots() const;
    /// Multiplicity of the root at the origin (number of vanishing low-order coefficients).
    [[nodiscard]] int zero_root_multiplicity() const;

    [[nodiscard]] Polynomial derivative() const;
    [[nodiscard]] Polynomial scaled(double c) const;

    /// Quotient and remainder of long division.
    [[nodiscard]] std::pair<Polynomial, Polynomial> divmod(const Polynomial& divisor) const;

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator-(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
    friend bool operator==(const Polynomial& a, const Polynomial& b) = default;

    [[nodiscard]] std::string to_string(const char* var = "s") const;

private:
    void trim();
    std::vector<double> coeffs_;
};

/// Ratio of real polynomials, kept reduced (no common roots within
/// 1e-8*(1+|r|)) with a monic denominator.
class RationalFunction {
public:
    RationalFunction() : RationalFunction(Polynomial::constant(0.0), Polynomial::constant(1.0)) {}
    RationalFunction(Polynomial numerator, Polynomial denominator);
    /// Constant function.
    RationalFunction(double c)  // NOLINT(google-explicit-constructor)
        : RationalFunction(Polynomial::constant(c), Polynomial::constant(1.0)) {}

    static RationalFunction s() { return {Polynomial({0.0, 1.0}), Polynomial::constant(1.0)}; }

    [[nodiscard]] const Polynomial& numerator() const noexcept { return num_; }
    [[nodiscard]] const Polynomial& denominator() const noexcept { return den_; }
    [[nodiscard]] const std::vector<Complex>& poles() const noexcept { return poles_; }
    [[nodiscard]] std::vector<Complex> zeros() const { return num_.roots(); }

    [[nodiscard]] bool is_zero() const noexcept { return num_.is_zero(); }
    /// deg(den) - deg(num); negative for improper functions.
    [[nodiscard]] int relative_degree() const noexcept { return den_.degree() - num_.degree(); }
    [[nodiscard]] bool is_proper() const noexcept { return relative_degree() >= 0; }

    /// Value at s; throws NearPoleError when s sits on a pole.
    [[nodiscard]] Complex operator()(Complex s) const;
    /// Exact value at s = 0 from coefficient ratios; nullopt when the origin is a pole.
    [[nodiscard]] std::optional<double> value_at_zero() const;

    friend RationalFunction operator+(const RationalFunction& a, const RationalFunction& b);
    friend RationalFunction operator-(const RationalFunction& a, const RationalFunction& b);
    friend RationalFunction operator*(const RationalFunction& a, const RationalFunction& b);
    friend RationalFunction operator-(const RationalFunction& a);

    [[nodiscard]] std::string to_string() const;

private:
    Polynomial num_;
    Polynomial den_;
    std::vector<Complex> poles_;
};

[[nodiscard]] RationalFunction inverse(const RationalFunction& f);
/// a / (1 - a*b); the positive-feedback composition used for bus models.
[[nodiscard]] RationalFunction feedback(const RationalFunction& a, const RationalFunction& b);

/// Two rational functions agree when their cross products match coefficientwise
/// to relative tolerance `tol`.
[[nodiscard]] bool equivalent(const RationalFunction& a, const RationalFunction& b, double tol = 1e-9);

inline constexpr double kStabilityMarginTol = 1e-9;
inline constexpr double kRootMatchTol = 1e-8;

struct HinfCertificate {
    bool stable = false;
    bool proper = false;
    /// A pole on the imaginary axis (|Re| <= kStabilityMarginTol) was found.
    bool marginal = false;
    std::optional<Complex> offending_pole;
    /// sup |f(jw)| estimated on a log grid, only filled when stable.
    double norm_estimate = 0.0;
    std::string reason;
};

/// True iff f is proper and every pole has Re < -kStabilityMarginTol.
[[nodiscard]] HinfCertificate is_hinf_stable(const RationalFunction& f);

/// Continuous-time realization
///   x' = A x + B u,  y = C x + D u + E u'.
/// E carries the derivative feedthrough of improper-by-one blocks.
struct StateSpace {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd C;
    Eigen::MatrixXd D;
    Eigen::MatrixXd E;

    [[nodiscard]] Eigen::Index states() const noexcept { return A.rows(); }
    [[nodiscard]] Eigen::MatrixXcd frequency_response(Complex s) const;
};

/// Controllable canonical realization of a SISO rational function; improper
/// functions of relative degree -1 populate E. Throws ImproperError otherwise.
[[nodiscard]] StateSpace realize(const RationalFunction& f);

}  // namespace hybridstab
