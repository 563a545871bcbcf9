#pragma once

// Serialization of stability reports, frequency sweeps and time series.

#include <string>
#include <vector>

#include "hybridstab/casefile.hpp"
#include "hybridstab/closedloop.hpp"
#include "hybridstab/stability.hpp"

namespace hybridstab {

[[nodiscard]] std::string tool_version();

/// 17 significant digits, '.' decimal, no locale.
/// NaN and infinities print as nan, inf, -inf.
[[nodiscard]] std::string format_number(double v);

/// `# key=value` provenance lines shared by every CSV table.
[[nodiscard]] std::string provenance_header(const CaseFile& c, const std::string& table);

[[nodiscard]] std::string render_report_text(const CaseFile& c, const StabilityReport& r);
[[nodiscard]] std::string render_report_json(const CaseFile& c, const StabilityReport& r);

/// One row of the frequency sweep. Margins that do not apply (no DC subnetwork) are NaN.
struct SweepRow {
    double omega = 0.0;
    double sigma_max = 0.0;   ///< of H(jw)
    double herm_min = 0.0;    ///< lambda_min(Herm H^{-1}(jw))
    double margin_13 = 0.0;   ///< min_i xi_i
    double margin_14 = 0.0;   ///< mean_i xi_i
    double margin_21 = 0.0;   ///< min_j Re kbar_j^{-1}
    double margin_23 = 0.0;   ///< 4 min xi min_j(Re kbar_j^{-1} lambda_j) - (lambda_max Delta)^2
};

[[nodiscard]] std::vector<SweepRow> sweep_rows(const ClosedLoopModel& model, const std::vector<double>& omegas,
                                               unsigned threads = 0);

/// Columns: omega,sigma_max_H,lambda_min_herm,margin_1.3,margin_1.4,margin_2.1,margin_2.3
[[nodiscard]] std::string sweep_csv(const CaseFile& c, const std::vector<SweepRow>& rows);

/// Columns: t, f_<id>..., f_bar, f_dev_<id>..., v_<id> for converter buses.
[[nodiscard]] std::string timeseries_csv(const CaseFile& c, const ClosedLoopModel& model,
                                         const SimulationResult& res);

}  // namespace hybridstab
