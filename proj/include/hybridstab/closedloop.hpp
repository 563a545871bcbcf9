#pragma once

// Closed-loop interconnection of bus blocks with the AC and DC networks:
// frequency response of H(s) and a linear time-domain simulator.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hybridstab/network.hpp"
#include "hybridstab/ratfun.hpp"

namespace hybridstab {

/// Linear map of state x and disturbance input p onto a signal vector.
struct SignalMap {
    Eigen::MatrixXd x;
    Eigen::MatrixXd p;
};

/// State-space realization of the interconnection
///   x' = A x + B p,   omega = Cw x + Dw p,   z = Cz x + Dz p,
/// with x = [x_g, x_k, x_f, theta] where x_f holds the k^{-1} prefilter of
/// machine-bus disturbances and theta are angle coordinates on range(L_ac).
struct Realization {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    SignalMap omega;
    SignalMap z;
    Eigen::Index n_g = 0;
    Eigen::Index n_k = 0;
    Eigen::Index n_f = 0;
    Eigen::Index n_theta = 0;
    bool prefilter = true;

    [[nodiscard]] Eigen::Index states() const noexcept { return A.rows(); }
};

struct ClosedLoopModel {
    std::vector<int> bus_ids;
    std::vector<BusModel> buses;
    LaplacianSet lap;
    /// rad/s per model frequency unit (1 for rad/s models, 2*pi*f_base for p.u.).
    double angle_scale = 1.0;
    /// Orthonormal basis of range(L_ac); its columns span the angle coordinates.
    Eigen::MatrixXd angle_basis;
    /// n - rank(L_ac): angle directions invisible to the network.
    Eigen::Index structural_zeros = 0;
    std::optional<Realization> realization;
    /// Why no realization exists (improper g, algebraic loop, ...).
    std::string realization_error;

    [[nodiscard]] std::size_t size() const noexcept { return buses.size(); }
    /// Throws Error carrying realization_error when the model cannot be simulated.
    [[nodiscard]] const Realization& require_realization() const;
};

struct AssembleOptions {
    /// Apply k^{-1} to disturbances on machine buses.
    bool prefilter = true;
    /// Raise instead of recording the reason when the realization fails.
    bool require_realization = false;
};

/// Throws NetworkError for passive buses and AlgebraicLoopError (only when
/// the realization is required) for a singular feedthrough loop.
[[nodiscard]] ClosedLoopModel assemble(const NetworkCase& net, const AssembleOptions& opts = {});

/// H(s) by block algebra: K (I + G L_dc + G L_ac K / s)^{-1} G.
[[nodiscard]] Eigen::MatrixXcd h_blocks(const ClosedLoopModel& model, Complex s);

/// Transfer from load steps to omega, sign flipped: H(s) K^{-1}(s) when the
/// realization carries the prefilter, H(s) otherwise.
[[nodiscard]] Eigen::MatrixXcd h_realization(const Realization& r, Complex s);

struct FrequencyPoint {
    double omega = 0.0;
    Eigen::MatrixXcd H;
    Eigen::MatrixXcd KinvH;
    double sigma_max = 0.0;        ///< of H
    double sigma_max_kinv = 0.0;   ///< of K^{-1} H
    double herm_min = 0.0;         ///< lambda_min(Herm H^{-1})
    double condition = 0.0;        ///< 2-norm condition number of H^{-1}
};

/// Dense evaluation on positive frequencies (rad/s), concurrently.
[[nodiscard]] std::vector<FrequencyPoint> freq_response(const ClosedLoopModel& model,
                                                        const std::vector<double>& omegas,
                                                        unsigned threads = 0);

/// Steady-state lim_{s->0+} H(s) p by linear extrapolation of H(j eps).
[[nodiscard]] Eigen::VectorXd h_limit_at_zero(const ClosedLoopModel& model, const Eigen::VectorXd& p);

/// Realization DC gain from p to omega, -Cw A^{-1} B + Dw, with A restricted
/// to the reachable part. Throws SingularMatrixError when A is singular.
[[nodiscard]] Eigen::MatrixXd realization_dc_gain(const Realization& r);

enum class EigenTag { Stable, Marginal, Unstable, Structural };

[[nodiscard]] const char* to_string(EigenTag t);

struct TaggedEigenvalue {
    Complex value;
    EigenTag tag = EigenTag::Stable;
};

inline constexpr double kEigenMarginTol = 1e-8;

/// Eigenvalues of A plus one structural zero per angle direction outside range(L_ac).
[[nodiscard]] std::vector<TaggedEigenvalue> eigen_audit(const ClosedLoopModel& model);

struct SimulationOptions {
    double t_end = 20.0;
    double dt = 1e-3;
    /// Keep every k-th sample in the result.
    int record_every = 1;
};

struct SimulationResult {
    std::vector<int> bus_ids;
    std::vector<double> t;
    /// Rows are samples, columns are buses.
    Eigen::MatrixXd omega;  ///< model units
    Eigen::MatrixXd z;
    Eigen::MatrixXd f_hz;   ///< frequency deviation in Hz
    Eigen::VectorXd f_bar;  ///< mean of f_hz over buses
    Eigen::MatrixXd f_dev;  ///< f_hz - f_bar

    [[nodiscard]] std::size_t samples() const noexcept { return t.size(); }
};

/// Trapezoidal integration with step disturbances from `disturbances`.
/// Requires dt <= 0.1 / max|lambda(A)|; throws ParameterError otherwise and
/// SimulationDivergedError when a trace exceeds 1e6.
[[nodiscard]] SimulationResult simulate(const ClosedLoopModel& model, const std::vector<Disturbance>& disturbances,
                                        const SimulationOptions& opts);

/// Largest eigenvalue modulus of A (0 for an empty realization).
[[nodiscard]] double spectral_radius(const Realization& r);

}  // namespace hybridstab
