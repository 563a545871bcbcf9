#include "hybridstab/commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hybridstab/closedloop.hpp"
#include "hybridstab/error.hpp"
#include "hybridstab/report.hpp"

namespace hybridstab {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw CaseError("cannot write " + path.string());
    }
    f << text;
    if (!f) {
        throw CaseError("write failed for " + path.string());
    }
}

void emit(const std::string& target, const std::string& text, std::ostream& out) {
    if (target.empty() || target == "-") {
        out << text;
    } else {
        write_text(target, text);
    }
}

// Maps library exceptions onto exit codes; `body` returns the success code.
template <class Body>
int guarded(std::ostream& err, Body&& body) {
    try {
        return body();
    } catch (const SimulationDivergedError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUnstable;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInputError;
    }
}

struct SimulationRun {
    ClosedLoopModel model;
    SimulationResult result;
    double dt = 0.0;
};

// Returns nullopt (after printing a diagnosis) when the realization has unstable modes.
std::optional<SimulationRun> run_simulation(const CaseFile& c, std::optional<double> t_end, std::optional<double> dt,
                                            int record_every, std::ostream& err) {
    SimulationRun run{assemble(c.network), {}, 0.0};
    const Realization& r = run.model.require_realization();
    std::vector<std::string> unstable;
    for (const auto& e : eigen_audit(run.model)) {
        if (e.tag == EigenTag::Unstable) {
            std::ostringstream os;
            os << format_number(e.value.real()) << (e.value.imag() < 0 ? " - " : " + ") << "j"
               << format_number(std::abs(e.value.imag()));
            unstable.push_back(os.str());
        }
    }
    if (!unstable.empty()) {
        err << "error: closed loop has " << unstable.size() << " unstable mode(s):";
        for (const auto& u : unstable) {
            err << ' ' << u;
        }
        err << "\n";
        return std::nullopt;
    }

    SimulationOptions opts;
    opts.t_end = t_end.value_or(c.analysis.t_end);
    opts.record_every = record_every;
    if (dt) {
        opts.dt = *dt;
    } else {
        const double rho = spectral_radius(r);
        opts.dt = stable_step(c.analysis.dt, rho);
        if (opts.dt < c.analysis.dt) {
            const int every = std::max(1, static_cast<int>(std::lround(c.analysis.dt / opts.dt)));
            opts.record_every = record_every * every;
            err << "note: case dt " << format_number(c.analysis.dt) << " s is above 0.1/|lambda|max; using dt = "
                << format_number(opts.dt) << " s, recording every " << opts.record_every << " steps\n";
        }
    }
    run.dt = opts.dt;
    run.result = simulate(run.model, c.network.disturbances, opts);
    return run;
}

std::string simulation_summary(const CaseFile& c, const SimulationResult& res) {
    std::ostringstream os;
    double first_step = std::numeric_limits<double>::infinity();
    for (const auto& d : c.network.disturbances) {
        first_step = std::min(first_step, d.time);
    }
    if (res.samples() == 0) {
        return "no samples\n";
    }
    Eigen::Index nadir_row = 0;
    double spread = 0.0;
    for (Eigen::Index k = 0; k < res.f_bar.size(); ++k) {
        if (std::abs(res.f_bar(k)) > std::abs(res.f_bar(nadir_row))) {
            nadir_row = k;
        }
        if (res.f_dev.cols() > 0) {
            spread = std::max(spread, res.f_dev.row(k).cwiseAbs().maxCoeff());
        }
    }
    const auto last = res.f_bar.size() - 1;
    os << "samples " << res.samples() << ", t_end " << format_number(res.t.back()) << " s\n";
    if (std::isfinite(first_step)) {
        os << "first step at " << format_number(first_step) << " s\n";
    }
    os << "nadir f_bar = " << format_number(res.f_bar(nadir_row)) << " Hz at t = "
       << format_number(res.t[static_cast<std::size_t>(nadir_row)]) << " s\n"
       << "final f_bar = " << format_number(res.f_bar(last)) << " Hz\n"
       << "max |f_i - f_bar| = " << format_number(spread) << " Hz\n";
    return os.str();
}

std::vector<double> sweep_grid(const CaseFile& c) {
    return FrequencyGrid::log_spaced(c.analysis.grid_min, c.analysis.grid_max, c.analysis.grid_points,
                                     c.analysis.delta)
        .omega;
}

}  // namespace

int exit_code_for(Verdict v) {
    switch (v) {
        case Verdict::Pass:
            return kExitPass;
        case Verdict::Marginal:
            return kExitMarginal;
        case Verdict::Fail:
            return kExitFail;
    }
    return kExitFail;
}

double stable_step(double dt, double rho) {
    if (!(rho > 0.0) || dt <= 0.1 / rho) {
        return dt;
    }
    const double n = std::ceil(dt * rho / 0.1 * (1.0 + 1e-9));
    return dt / n;
}

CaseFile load_case(const std::filesystem::path& path, const GridFlags& flags, std::ostream& log) {
    CaseFile c = parse_case(path);
    if (c.network.has_passive_buses()) {
        if (!flags.auto_kron) {
            throw NetworkError("case " + path.string() +
                               " has passive buses; Kron-reduce them first (kron command or --auto-kron)");
        }
        c = reduce_case(c).reduced;
        log << "note: passive buses eliminated by Kron reduction (" << c.network.size() << " buses remain)\n";
    }
    if (flags.delta) {
        c.analysis.delta = *flags.delta;
    }
    if (flags.grid_min) {
        c.analysis.grid_min = *flags.grid_min;
    }
    if (flags.grid_max) {
        c.analysis.grid_max = *flags.grid_max;
    }
    if (flags.points) {
        c.analysis.grid_points = *flags.points;
    }
    const auto& a = c.analysis;
    if (!(a.delta > 0.0) || !(a.grid_min > 0.0) || !(a.grid_max > a.grid_min) || a.grid_points < 2) {
        throw ParameterError("grid flags need delta, grid_min > 0, grid_max > grid_min and points >= 2", "grid");
    }
    return c;
}

int cmd_check(const std::filesystem::path& path, const CheckFlags& flags, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const CaseFile c = load_case(path, flags, err);
        const StabilityReport r = certify(c.network, c.analysis_options());
        out << (flags.json ? render_report_json(c, r) : render_report_text(c, r));
        return exit_code_for(r.overall);
    });
}

int cmd_simulate(const std::filesystem::path& path, const SimulateFlags& flags, std::ostream& out,
                 std::ostream& err) {
    return guarded(err, [&] {
        GridFlags g;
        g.auto_kron = flags.auto_kron;
        const CaseFile c = load_case(path, g, err);
        if (flags.record_every < 1) {
            throw ParameterError("--record-every must be at least 1", "record_every");
        }
        const auto run = run_simulation(c, flags.t_end, flags.dt, flags.record_every, err);
        if (!run) {
            return static_cast<int>(kExitUnstable);
        }
        emit(flags.out, timeseries_csv(c, run->model, run->result), out);
        std::ostream& summary = (flags.out.empty() || flags.out == "-") ? err : out;
        summary << simulation_summary(c, run->result);
        return static_cast<int>(kExitPass);
    });
}

int cmd_sweep(const std::filesystem::path& path, const SweepFlags& flags, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const CaseFile c = load_case(path, flags, err);
        const ClosedLoopModel model = assemble(c.network);
        emit(flags.out, sweep_csv(c, sweep_rows(model, sweep_grid(c))), out);
        return static_cast<int>(kExitPass);
    });
}

int cmd_kron(const std::filesystem::path& path, const KronFlags& flags, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const CaseFile c = parse_case(path);
        const CaseReduction red = reduce_case(c, flags.keep);
        const auto& k = red.kron;
        std::vector<int> kept;
        for (std::size_t idx : k.keep) {
            kept.push_back(c.network.buses[idx].id);
        }
        out << "kept buses:";
        for (int id : kept) {
            out << ' ' << id;
        }
        out << "\nreduced Laplacian (unscaled susceptances):\n";
        for (Eigen::Index a = 0; a < k.reduced.rows(); ++a) {
            out << "  " << kept[static_cast<std::size_t>(a)] << ':';
            for (Eigen::Index b = 0; b < k.reduced.cols(); ++b) {
                out << ' ' << format_number(k.reduced(a, b));
            }
            out << '\n';
        }
        out << "load map (rows kept buses, columns all buses";
        for (const auto& b : c.network.buses) {
            out << ' ' << b.id;
        }
        out << "):\n";
        for (Eigen::Index a = 0; a < k.load_map.rows(); ++a) {
            out << "  " << kept[static_cast<std::size_t>(a)] << ':';
            for (Eigen::Index b = 0; b < k.load_map.cols(); ++b) {
                out << ' ' << format_number(k.load_map(a, b));
            }
            out << '\n';
        }
        if (!flags.out.empty()) {
            write_text(flags.out, serialize_case(red.reduced));
            out << "wrote " << flags.out << '\n';
        }
        return static_cast<int>(kExitPass);
    });
}

int cmd_report(const std::filesystem::path& path, const ReportFlags& flags, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const CaseFile c = load_case(path, flags, err);
        std::filesystem::create_directories(flags.out_dir);
        const StabilityReport r = certify(c.network, c.analysis_options());
        write_text(flags.out_dir / "report.txt", render_report_text(c, r));
        write_text(flags.out_dir / "report.json", render_report_json(c, r));
        const ClosedLoopModel model = assemble(c.network);
        write_text(flags.out_dir / "sweep.csv", sweep_csv(c, sweep_rows(model, sweep_grid(c))));
        if (model.realization) {
            try {
                const auto run = run_simulation(c, flags.t_end, flags.dt, 1, err);
                if (run) {
                    write_text(flags.out_dir / "timeseries.csv", timeseries_csv(c, run->model, run->result));
                }
            } catch (const SimulationDivergedError& e) {
                err << "note: time series skipped: " << e.what() << '\n';
            }
        } else {
            err << "note: time series skipped: " << model.realization_error << '\n';
        }
        out << "overall " << to_string(r.overall) << "; wrote " << flags.out_dir.string() << '\n';
        return exit_code_for(r.overall);
    });
}

}  // namespace hybridstab
