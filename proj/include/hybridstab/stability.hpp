#pragma once

// Bus-level and network-level frequency-domain stability conditions.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hybridstab/buslib.hpp"
#include "hybridstab/network.hpp"

namespace hybridstab {

enum class Verdict { Pass, Marginal, Fail };

[[nodiscard]] std::string_view to_string(Verdict v);
/// Worse of two verdicts (Fail > Marginal > Pass).
[[nodiscard]] Verdict worst(Verdict a, Verdict b);

/// Open-inequality test "v > 0" on floating point: values at or above
/// 1e-9 * min(1, scale) pass, smaller positive values are marginal, the rest fail.
/// `scale` is the magnitude of the function whose real part is `v`.
[[nodiscard]] Verdict classify_positive(double v, double scale);

inline constexpr double kStrictnessTol = 1e-9;

struct AnalysisOptions {
    double delta = 1e-3;       ///< radius of S_delta, rad/s
    double grid_min = 1e-4;    ///< rad/s
    double grid_max = 1e4;
    int grid_points = 800;
    int refine_count = 5;      ///< local minima refined after the coarse pass
    double refine_rel = 1e-4;  ///< relative spacing reached by refinement
    int sdelta_radii = 20;
    int sdelta_angles = 9;
    /// Worker threads; 0 reads HYBRIDSTAB_THREADS, falling back to the hardware count.
    unsigned threads = 0;
};

struct FrequencyGrid {
    std::vector<double> omega;  ///< ascending, positive
    bool includes_zero_limit = true;
    double delta = 1e-3;

    [[nodiscard]] static FrequencyGrid log_spaced(double wmin, double wmax, int points, double delta);
};

struct ConditionResult {
    std::string id;  ///< "1.1" ... "2.3"
    Verdict verdict = Verdict::Pass;
    std::optional<double> worst_omega;  ///< rad/s; 0 stands for the s -> 0 limit
    double margin = 0.0;                ///< tested quantity at the worst point
    std::optional<int> culprit_bus;     ///< bus id
    std::optional<std::size_t> culprit_subnetwork;
    std::string detail;
};

struct BusCondition1 {
    int bus = 0;
    BusKind kind = BusKind::Passive;
    ConditionResult c11;
    ConditionResult c12;
    ConditionResult c13;
    std::optional<double> xi_at_zero;  ///< limit of xi(jw) as w -> 0
};

struct StabilityReport {
    std::vector<ConditionResult> conditions;  ///< 1.1, 1.2, 1.3, 1.4, 2.1, 2.2, 2.3
    std::vector<BusCondition1> per_bus;
    Verdict overall = Verdict::Pass;
    double delta = 0.0;
    double c = 0.0;   ///< max |g_i^{-1}| on S_delta
    double c1 = 0.0;  ///< min Re kbar_j^{-1} on S_delta
    double c2 = 0.0;  ///< max Delta(s)/|s| on S_delta
    /// The displayed and the proof form of 2.3 classified every sample the same way.
    bool forms_23_agree = true;
    /// min over the grid of lambda_min(Herm H^{-1}(jw)).
    std::optional<double> witness_min_herm;
    /// Bound on sigma_max(H(jw)) implied by the witness, 1 / witness.
    std::optional<double> kappa;
    std::size_t samples = 0;  ///< axis samples after refinement

    [[nodiscard]] const ConditionResult& condition(std::string_view id) const;
};

/// Result of the exact positive-real screening of a SISO function on the closed RHP.
struct AxisAnalysis {
    bool analytic = true;  ///< no poles in the closed RHP apart from an admissible one at 0
    bool infinity_ok = true;
    std::string reason;
    /// Frequencies where Re f(jw) changes sign or has a local extremum crossing zero.
    std::vector<double> witnesses;
    /// Limit of Re f(jw) as w -> 0 (may be +-inf).
    double limit_at_zero = 0.0;
};

[[nodiscard]] AxisAnalysis analyze_real_part(const RationalFunction& f);

/// Limit of Re f(jw) as w -> 0+ from the lowest-order coefficients.
[[nodiscard]] double real_part_limit_at_zero(const RationalFunction& f);

struct CoherencyQuantities {
    std::vector<Complex> kbar_inv;  ///< per subnetwork
    /// Per bus: the subnetwork mean for DC-connected buses, k_i^{-1} otherwise.
    std::vector<Complex> kbar_bus;
    std::vector<double> delta_j;    ///< per subnetwork max deviation
    double delta = 0.0;             ///< max over subnetworks
    double min_xi = 0.0;
    std::size_t min_xi_bus = 0;  ///< index
};

[[nodiscard]] CoherencyQuantities coherency_quantities(const std::vector<BusModel>& buses,
                                                       const std::vector<DcSubnetwork>& subnetworks,
                                                       Complex s);

/// H^{-1}(s) = G^{-1}K^{-1} + L_dc K^{-1} + L_ac / s.
[[nodiscard]] Eigen::MatrixXcd h_inverse(const std::vector<BusModel>& buses, const LaplacianSet& lap,
                                         Complex s);

/// Smallest eigenvalue of the Hermitian part of a square complex matrix.
[[nodiscard]] double hermitian_part_min(const Eigen::MatrixXcd& m);

[[nodiscard]] std::vector<BusCondition1> check_condition1(const NetworkCase& net,
                                                          const FrequencyGrid& grid);

/// Conditions 1.4 and 2.1-2.3 plus the certificate witness, run inside certify().
[[nodiscard]] StabilityReport certify(const NetworkCase& net, const AnalysisOptions& opts = {});

struct Lemma1Result {
    bool premise = false;     ///< lambda_min(Herm H^{-1}) >= 1/kappa
    bool conclusion = false;  ///< sigma_max(H) <= kappa (1 + 1e-10)
    double lambda_min = 0.0;
    double sigma_max = 0.0;
};

/// Throws SingularMatrixError if h_inv is singular.
[[nodiscard]] Lemma1Result lemma1_bound(const Eigen::MatrixXcd& h_inv, double kappa);

struct Lemma2Result {
    bool holds = false;
    double lhs = 0.0;  ///< Re(y* M D x)
    double rhs = 0.0;  ///< |x||y| lambda_max(M) max|d_i|
};

/// Throws NotPsdError when M is not symmetric positive semidefinite.
[[nodiscard]] Lemma2Result lemma2_bound(const Eigen::MatrixXd& M, const Eigen::VectorXcd& d,
                                        const Eigen::VectorXcd& x, const Eigen::VectorXcd& y,
                                        double slack = 1e-12);

/// Positive definiteness of the 2x2 matrix [[a, -b/2], [-b/2, c]] by eigenvalues.
[[nodiscard]] bool schur_matrix_positive_definite(double a, double b, double c);

/// Thread count honoring HYBRIDSTAB_THREADS.
[[nodiscard]] unsigned worker_threads(unsigned requested);

}  // namespace hybridstab
