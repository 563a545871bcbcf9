#include <iostream>

#include <CLI11.hpp>

#include "hybridstab/commands.hpp"
#include "hybridstab/report.hpp"

namespace hs = hybridstab;

namespace {

void add_grid_flags(CLI::App* cmd, hs::GridFlags& g) {
    cmd->add_option("--delta", g.delta, "radius of S_delta in rad/s")->check(CLI::PositiveNumber);
    cmd->add_option("--grid-min", g.grid_min, "lowest sweep frequency, rad/s")->check(CLI::PositiveNumber);
    cmd->add_option("--grid-max", g.grid_max, "highest sweep frequency, rad/s")->check(CLI::PositiveNumber);
    cmd->add_option("--points", g.points, "log-spaced grid points")->check(CLI::Range(2, 10000000));
    cmd->add_flag("--auto-kron", g.auto_kron, "eliminate passive buses before analysis");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Frequency-domain stability checks and linear simulation of hybrid AC/DC grids"};
    app.set_version_flag("--version", hs::tool_version());
    app.require_subcommand(1);

    std::string case_path;

    hs::CheckFlags check;
    auto* c_check = app.add_subcommand("check", "certify the bus and network stability conditions");
    c_check->add_option("case", case_path, "case file")->required();
    add_grid_flags(c_check, check);
    c_check->add_flag("--json", check.json, "print the report as JSON");

    hs::SimulateFlags sim;
    auto* c_sim = app.add_subcommand("simulate", "time-domain response to the case disturbances");
    c_sim->add_option("case", case_path, "case file")->required();
    c_sim->add_option("--t-end", sim.t_end, "simulated time, s")->check(CLI::PositiveNumber);
    c_sim->add_option("--dt", sim.dt, "integration step, s")->check(CLI::PositiveNumber);
    c_sim->add_option("--record-every", sim.record_every, "keep every k-th step")->check(CLI::PositiveNumber);
    c_sim->add_option("--out", sim.out, "CSV output file (default stdout)");
    c_sim->add_flag("--auto-kron", sim.auto_kron, "eliminate passive buses before analysis");

    hs::SweepFlags sweep;
    auto* c_sweep = app.add_subcommand("sweep", "frequency sweep of H(jw) and the condition margins");
    c_sweep->add_option("case", case_path, "case file")->required();
    add_grid_flags(c_sweep, sweep);
    c_sweep->add_option("--out", sweep.out, "CSV output file (default stdout)");

    hs::KronFlags kron;
    auto* c_kron = app.add_subcommand("kron", "Kron-reduce passive buses");
    c_kron->add_option("case", case_path, "case file")->required();
    c_kron->add_option("--keep", kron.keep, "bus ids to keep (default: all non-passive)")->delimiter(',');
    c_kron->add_option("--out", kron.out, "write the reduced case file");

    hs::ReportFlags rep;
    auto* c_rep = app.add_subcommand("report", "check, sweep and simulate into a directory");
    c_rep->add_option("case", case_path, "case file")->required();
    add_grid_flags(c_rep, rep);
    c_rep->add_option("--out-dir", rep.out_dir, "output directory")->required();
    c_rep->add_option("--t-end", rep.t_end, "simulated time, s")->check(CLI::PositiveNumber);
    c_rep->add_option("--dt", rep.dt, "integration step, s")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : hs::kExitInputError;
    }

    if (c_check->parsed()) {
        return hs::cmd_check(case_path, check, std::cout, std::cerr);
    }
    if (c_sim->parsed()) {
        return hs::cmd_simulate(case_path, sim, std::cout, std::cerr);
    }
    if (c_sweep->parsed()) {
        return hs::cmd_sweep(case_path, sweep, std::cout, std::cerr);
    }
    if (c_kron->parsed()) {
        return hs::cmd_kron(case_path, kron, std::cout, std::cerr);
    }
    return hs::cmd_report(case_path, rep, std::cout, std::cerr);
}
