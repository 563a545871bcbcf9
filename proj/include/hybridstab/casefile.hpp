#pragma once

// Case files: JSON documents (comments allowed) with the sections
// meta, buses, ac_lines, dc_lines, disturbances and analysis.

#include <filesystem>
#include <string>
#include <vector>

#include "hybridstab/network.hpp"
#include "hybridstab/stability.hpp"

namespace hybridstab {

enum class FrequencyUnit { PerUnit, RadPerSecond };

struct CaseMeta {
    std::string name;
    double base_mva = 100.0;
    double base_frequency_hz = 50.0;
    FrequencyUnit frequency_unit = FrequencyUnit::RadPerSecond;
    std::string source;
    std::string notes;

    friend bool operator==(const CaseMeta&, const CaseMeta&) = default;
};

struct CaseAnalysis {
    double delta = 1e-3;
    double grid_min = 1e-4;
    double grid_max = 1e4;
    int grid_points = 800;
    double dt = 1e-3;
    double t_end = 20.0;

    friend bool operator==(const CaseAnalysis&, const CaseAnalysis&) = default;
};

struct CaseFile {
    CaseMeta meta;
    NetworkCase network;
    CaseAnalysis analysis;

    [[nodiscard]] AnalysisOptions analysis_options() const;

    friend bool operator==(const CaseFile&, const CaseFile&) = default;
};

/// Parses and validates a case document. Throws CaseError with the line
/// number when it can be located.
[[nodiscard]] CaseFile parse_case_text(const std::string& text);
[[nodiscard]] CaseFile parse_case(const std::filesystem::path& path);

/// Canonical JSON text; parse_case_text(serialize_case(c)) == c.
[[nodiscard]] std::string serialize_case(const CaseFile& c);

/// FNV-1a 64-bit hash of the canonical serialization, as 16 hex digits.
[[nodiscard]] std::string case_hash(const CaseFile& c);

struct CaseReduction {
    CaseFile reduced;
    KronResult kron;  ///< on the plain (unscaled) AC Laplacian
};

/// Kron-reduces the AC network onto `keep` (bus ids). An empty list keeps
/// every non-passive bus. Eliminated buses must be passive; their loads and
/// disturbances are spread onto kept buses with the Kron weights.
[[nodiscard]] CaseReduction reduce_case(const CaseFile& c, std::vector<int> keep = {});

}  // namespace hybridstab
