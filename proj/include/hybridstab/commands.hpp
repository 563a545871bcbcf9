#pragma once

// CLI commands as library calls: each returns the process exit code.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hybridstab/casefile.hpp"

namespace hybridstab {

enum ExitCode : int {
    kExitPass = 0,
    kExitInputError = 1,
    kExitFail = 2,
    kExitMarginal = 3,
    kExitUnstable = 4,
};

[[nodiscard]] int exit_code_for(Verdict v);

struct GridFlags {
    std::optional<double> delta;
    std::optional<double> grid_min;
    std::optional<double> grid_max;
    std::optional<int> points;
    bool auto_kron = false;
};

struct CheckFlags : GridFlags {
    bool json = false;
};

struct SimulateFlags {
    std::optional<double> t_end;
    std::optional<double> dt;
    int record_every = 1;
    std::string out;  ///< empty or "-" writes the CSV to stdout
    bool auto_kron = false;
};

struct SweepFlags : GridFlags {
    std::string out;
};

struct KronFlags {
    std::vector<int> keep;
    std::string out;  ///< reduced case file, optional
};

struct ReportFlags : GridFlags {
    std::filesystem::path out_dir;
    std::optional<double> t_end;
    std::optional<double> dt;
};

/// Reads a case and applies --auto-kron and grid overrides.
[[nodiscard]] CaseFile load_case(const std::filesystem::path& path, const GridFlags& flags, std::ostream& log);

int cmd_check(const std::filesystem::path& path, const CheckFlags& flags, std::ostream& out, std::ostream& err);
int cmd_simulate(const std::filesystem::path& path, const SimulateFlags& flags, std::ostream& out,
                 std::ostream& err);
int cmd_sweep(const std::filesystem::path& path, const SweepFlags& flags, std::ostream& out, std::ostream& err);
int cmd_kron(const std::filesystem::path& path, const KronFlags& flags, std::ostream& out, std::ostream& err);
/// check + sweep + simulate into out_dir (report.txt, report.json, sweep.csv, timeseries.csv).
int cmd_report(const std::filesystem::path& path, const ReportFlags& flags, std::ostream& out, std::ostream& err);

/// Step chosen by simulate when the case dt is too coarse: dt / ceil(dt rho / 0.1),
/// so that recording every ceil(...) steps keeps the case sample times.
[[nodiscard]] double stable_step(double dt, double rho);

}  // namespace hybridstab
