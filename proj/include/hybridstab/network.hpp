#pragma once

// Hybrid AC/DC network graph: Laplacians, DC subnetworks, Kron reduction.

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hybridstab/buslib.hpp"

namespace hybridstab {

struct BusEntry {
    int id = 0;
    BusModel model;
    double p_load = 0.0;  ///< nominal load, p.u.

    friend bool operator==(const BusEntry&, const BusEntry&) = default;
};

struct AcEdge {
    int from = 0;
    int to = 0;
    double b = 0.0;  ///< susceptance, stored positive

    friend bool operator==(const AcEdge&, const AcEdge&) = default;
};

struct DcEdge {
    int from = 0;
    int to = 0;
    double g = 0.0;  ///< conductance, stored positive

    friend bool operator==(const DcEdge&, const DcEdge&) = default;
};

/// Step change of load at a bus.
struct Disturbance {
    int bus = 0;
    double magnitude = 0.0;  ///< p.u.
    double time = 0.0;       ///< s

    friend bool operator==(const Disturbance&, const Disturbance&) = default;
};

struct NetworkCase {
    std::vector<BusEntry> buses;  ///< sorted by id after validate()
    std::vector<AcEdge> ac_edges;
    std::vector<DcEdge> dc_edges;
    std::vector<Disturbance> disturbances;
    /// Converts the frequency unit used by the bus models into rad/s for the
    /// AC angle integrator: 1 for rad/s models, 2*pi*f_base for p.u. frequency.
    double angle_scale = 1.0;

    [[nodiscard]] std::size_t size() const noexcept { return buses.size(); }
    /// Position of bus `id` in `buses`; throws NetworkError if absent.
    [[nodiscard]] std::size_t index_of(int id) const;
    [[nodiscard]] bool has_bus(int id) const;
    [[nodiscard]] bool has_passive_buses() const;

    /// Sorts buses by id and checks ids, edge endpoints, signs, self-loops,
    /// DC edges only between converters, and connectivity of AC + DC.
    void validate();

    friend bool operator==(const NetworkCase&, const NetworkCase&) = default;
};

struct DcSubnetwork {
    std::vector<std::size_t> nodes;  ///< bus indices, ascending
    Eigen::MatrixXd laplacian;       ///< n x n, supported on `nodes`
    double lambda_min = 0.0;         ///< smallest nonzero eigenvalue
};

struct LaplacianSet {
    Eigen::MatrixXd L_ac;  ///< n x n, already multiplied by angle_scale
    Eigen::MatrixXd L_dc;
    std::vector<DcSubnetwork> subnetworks;
    double lambda_ac_min = 0.0;  ///< smallest nonzero eigenvalue of L_ac (0 if none)
    double lambda_ac_max = 0.0;
    double lambda_dc_max = 0.0;
    /// Bus index -> subnetwork index, or nullopt for buses without DC lines.
    std::vector<std::optional<std::size_t>> subnetwork_of;
};

/// Builds all Laplacians and spectral extremes. The case must validate().
[[nodiscard]] LaplacianSet build_laplacians(const NetworkCase& net);

/// Weighted Laplacian of an edge list over `n` nodes (indices, not ids).
[[nodiscard]] Eigen::MatrixXd laplacian_from_edges(
    std::size_t n, const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges);

/// Smallest eigenvalue above 1e-9 * max(1, lambda_max) of a symmetric PSD matrix.
[[nodiscard]] double smallest_nonzero_eigenvalue(const Eigen::MatrixXd& sym);

struct KronResult {
    std::vector<std::size_t> keep;      ///< kept node indices, ascending
    Eigen::MatrixXd reduced;            ///< Schur complement onto `keep`
    /// keep.size() x n map from full injections to equivalent kept injections.
    Eigen::MatrixXd load_map;
};

/// Schur-complement elimination of every node not in `keep`.
/// Throws SingularMatrixError when the interior block is singular.
[[nodiscard]] KronResult kron_reduce(const Eigen::MatrixXd& L, std::vector<std::size_t> keep);

struct MachineStator {
    double b = 0.0;        ///< stator susceptance
    double damping = 0.0;  ///< damper coefficient D_k
};

struct StatorElimination {
    Eigen::MatrixXd L_s;              ///< loopy Laplacian: network + diag(b)
    Eigen::MatrixXd divider;          ///< L_s^{-1} D_B, row-stochastic
    Eigen::MatrixXd rotor_equivalent; ///< D_B - D_B L_s^{-1} D_B
    Eigen::MatrixXd load_map;         ///< D_B L_s^{-1}
    Eigen::VectorXd gamma;            ///< D_k / b_k
};

/// Eliminates the stator buses behind the machine reactances.
/// `stator_network` is the (plain) Laplacian among stator buses.
[[nodiscard]] StatorElimination stator_elimination(const std::vector<MachineStator>& machines,
                                                   const Eigen::MatrixXd& stator_network);

}  // namespace hybridstab
