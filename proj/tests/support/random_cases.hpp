#pragma once

// Random hybrid AC/DC networks for property tests.

#include <random>

#include "hybridstab/network.hpp"

namespace hybridstab::testing {

struct RandomCaseOptions {
    int min_buses = 2;
    int max_buses = 12;
    /// Probability that a converter joins a DC subnetwork.
    double dc_probability = 0.6;
    /// Allow grid-following converters (which fail Condition 1.3).
    bool allow_gfl = false;
    /// Extra AC edges beyond the spanning tree, as a fraction of n.
    double extra_edge_ratio = 0.5;
};

/// Connected AC network (single angle reference) with optional DC subnetworks.
/// Converters sharing a DC subnetwork share kw so that Delta(0) = 0.
[[nodiscard]] NetworkCase random_case(std::mt19937_64& rng, const RandomCaseOptions& opts = {});

/// Random weighted connected graph Laplacian on n nodes.
[[nodiscard]] Eigen::MatrixXd random_laplacian(std::mt19937_64& rng, int n, double extra_edge_ratio = 0.5);

}  // namespace hybridstab::testing
