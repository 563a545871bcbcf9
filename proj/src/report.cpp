#include "hybridstab/report.hpp"

#include <charconv>
#include <cstdio>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "hybridstab/error.hpp"
#include "parallel.hpp"

#ifndef HYBRIDSTAB_VERSION
#define HYBRIDSTAB_VERSION "0.0.0"
#endif

namespace hybridstab {

namespace {

using ojson = nlohmann::ordered_json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ojson number_or_null(double v) {
    return std::isfinite(v) ? ojson(v) : ojson(nullptr);
}

template <class T>
ojson optional_json(const std::optional<T>& v) {
    return v ? ojson(*v) : ojson(nullptr);
}

std::string omega_text(const std::optional<double>& w) {
    if (!w) {
        return "-";
    }
    return *w == 0.0 ? "s->0" : format_number(*w) + " rad/s";
}

std::vector<int> subnetwork_bus_ids(const CaseFile& c, std::size_t j) {
    const LaplacianSet lap = build_laplacians(c.network);
    std::vector<int> ids;
    if (j < lap.subnetworks.size()) {
        for (std::size_t idx : lap.subnetworks[j].nodes) {
            ids.push_back(c.network.buses[idx].id);
        }
    }
    return ids;
}

ojson condition_json(const CaseFile& c, const ConditionResult& r) {
    ojson o{{"id", r.id},
            {"verdict", std::string(to_string(r.verdict))},
            {"worst_omega", optional_json(r.worst_omega)},
            {"margin", number_or_null(r.margin)},
            {"culprit_bus", optional_json(r.culprit_bus)},
            {"culprit_subnetwork", r.culprit_subnetwork ? ojson(*r.culprit_subnetwork) : ojson(nullptr)}};
    o["culprit_subnetwork_buses"] =
        r.culprit_subnetwork ? ojson(subnetwork_bus_ids(c, *r.culprit_subnetwork)) : ojson(nullptr);
    o["detail"] = r.detail;
    return o;
}

std::string csv_row(const std::vector<double>& values) {
    std::string line;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) {
            line += ',';
        }
        line += format_number(values[i]);
    }
    line += '\n';
    return line;
}

}  // namespace

std::string tool_version() {
    return HYBRIDSTAB_VERSION;
}

std::string format_number(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

std::string provenance_header(const CaseFile& c, const std::string& table) {
    std::ostringstream os;
    os << "# tool=hybridstab " << tool_version() << '\n'
       << "# table=" << table << '\n'
       << "# case=" << c.meta.name << '\n'
       << "# case_hash=" << case_hash(c) << '\n'
       << "# delta=" << format_number(c.analysis.delta) << " grid_min=" << format_number(c.analysis.grid_min)
       << " grid_max=" << format_number(c.analysis.grid_max) << " grid_points=" << c.analysis.grid_points << '\n'
       << "# dt=" << format_number(c.analysis.dt) << " t_end=" << format_number(c.analysis.t_end) << '\n';
    return os.str();
}

std::string render_report_text(const CaseFile& c, const StabilityReport& r) {
    std::ostringstream os;
    os << "case " << (c.meta.name.empty() ? "(unnamed)" : c.meta.name) << "  hash " << case_hash(c) << '\n'
       << "buses " << c.network.size() << "  delta " << format_number(r.delta) << " rad/s  samples " << r.samples
       << "\n\n";
    os << "condition  verdict   worst omega            margin                   culprit\n";
    for (const auto& cond : r.conditions) {
        std::string culprit = "-";
        if (cond.culprit_bus) {
            culprit = "bus " + std::to_string(*cond.culprit_bus);
        } else if (cond.culprit_subnetwork) {
            culprit = "dc subnetwork " + std::to_string(*cond.culprit_subnetwork) + " (buses";
            for (int id : subnetwork_bus_ids(c, *cond.culprit_subnetwork)) {
                culprit += ' ' + std::to_string(id);
            }
            culprit += ')';
        }
        char line[256];
        std::snprintf(line, sizeof line, "%-10s %-9s %-22s %-24s %s\n", cond.id.c_str(),
                      std::string(to_string(cond.verdict)).c_str(), omega_text(cond.worst_omega).c_str(),
                      format_number(cond.margin).c_str(), culprit.c_str());
        os << line;
        if (!cond.detail.empty()) {
            os << "           " << cond.detail << '\n';
        }
    }
    os << "\nper bus:\n";
    for (const auto& b : r.per_bus) {
        os << "  bus " << b.bus << " (" << to_string(b.kind) << "): 1.1 " << to_string(b.c11.verdict) << ", 1.2 "
           << to_string(b.c12.verdict) << ", 1.3 " << to_string(b.c13.verdict);
        if (b.xi_at_zero) {
            os << ", xi(0) = " << format_number(*b.xi_at_zero);
        }
        os << '\n';
        for (const ConditionResult* sub : {&b.c11, &b.c12, &b.c13}) {
            if (sub->verdict != Verdict::Pass) {
                os << "      " << sub->id << ": " << sub->detail << '\n';
            }
        }
    }
    os << "\nconstants: c = " << format_number(r.c) << ", c1 = " << format_number(r.c1)
       << ", c2 = " << format_number(r.c2) << '\n';
    if (!r.forms_23_agree) {
        os << "warning: the two forms of condition 2.3 disagree on some samples\n";
    }
    if (r.witness_min_herm) {
        os << "witness: min lambda_min(Herm H^{-1}(jw)) = " << format_number(*r.witness_min_herm);
        if (r.kappa) {
            os << ", sigma_max(H) <= kappa = " << format_number(*r.kappa);
        }
        os << '\n';
    }
    os << "overall: " << to_string(r.overall) << '\n';
    return os.str();
}

std::string render_report_json(const CaseFile& c, const StabilityReport& r) {
    ojson root;
    root["tool"] = ojson{{"name", "hybridstab"}, {"version", tool_version()}};
    root["case"] = ojson{{"name", c.meta.name}, {"hash", case_hash(c)}, {"buses", c.network.size()}};
    root["settings"] = ojson{{"delta", r.delta},
                             {"grid_min", c.analysis.grid_min},
                             {"grid_max", c.analysis.grid_max},
                             {"grid_points", c.analysis.grid_points},
                             {"samples", r.samples}};
    root["overall"] = std::string(to_string(r.overall));
    root["conditions"] = ojson::array();
    for (const auto& cond : r.conditions) {
        root["conditions"].push_back(condition_json(c, cond));
    }
    root["buses"] = ojson::array();
    for (const auto& b : r.per_bus) {
        root["buses"].push_back(ojson{{"id", b.bus},
                                      {"kind", std::string(to_string(b.kind))},
                                      {"xi_at_zero", b.xi_at_zero ? number_or_null(*b.xi_at_zero) : ojson(nullptr)},
                                      {"conditions", ojson::array({condition_json(c, b.c11), condition_json(c, b.c12),
                                                                   condition_json(c, b.c13)})}});
    }
    root["constants"] = ojson{{"c", number_or_null(r.c)}, {"c1", number_or_null(r.c1)}, {"c2", number_or_null(r.c2)}};
    root["forms_23_agree"] = r.forms_23_agree;
    root["witness"] = ojson{{"min_herm_h_inv", r.witness_min_herm ? number_or_null(*r.witness_min_herm) : ojson(nullptr)},
                            {"kappa", r.kappa ? number_or_null(*r.kappa) : ojson(nullptr)}};
    return root.dump(2) + "\n";
}

std::vector<SweepRow> sweep_rows(const ClosedLoopModel& model, const std::vector<double>& omegas, unsigned threads) {
    const std::vector<FrequencyPoint> fr = freq_response(model, omegas, threads);
    std::vector<SweepRow> rows(omegas.size());
    const auto& subs = model.lap.subnetworks;
    detail::parallel_for(omegas.size(), worker_threads(threads), [&](std::size_t q) {
        SweepRow& row = rows[q];
        row.omega = fr[q].omega;
        row.sigma_max = fr[q].sigma_max;
        row.herm_min = fr[q].herm_min;
        const Complex s(0.0, row.omega);
        try {
            double sum = 0.0;
            for (const auto& b : model.buses) {
                sum += bus_xi(b, s);
            }
            row.margin_14 = sum / static_cast<double>(model.size());
            const CoherencyQuantities cq = coherency_quantities(model.buses, subs, s);
            row.margin_13 = cq.min_xi;
            if (subs.empty()) {
                row.margin_21 = kNaN;
                row.margin_23 = kNaN;
            } else {
                double min_re = std::numeric_limits<double>::infinity();
                double min_weighted = std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < subs.size(); ++j) {
                    min_re = std::min(min_re, cq.kbar_inv[j].real());
                    min_weighted = std::min(min_weighted, cq.kbar_inv[j].real() * subs[j].lambda_min);
                }
                const double rhs = model.lap.lambda_dc_max * cq.delta;
                row.margin_21 = min_re;
                row.margin_23 = 4.0 * cq.min_xi * min_weighted - rhs * rhs;
            }
        } catch (const NearPoleError&) {
            row.margin_13 = row.margin_14 = row.margin_21 = row.margin_23 = kNaN;
        }
    });
    return rows;
}

std::string sweep_csv(const CaseFile& c, const std::vector<SweepRow>& rows) {
    std::string out = provenance_header(c, "sweep");
    out += "omega,sigma_max_H,lambda_min_herm,margin_1.3,margin_1.4,margin_2.1,margin_2.3\n";
    for (const auto& r : rows) {
        out += csv_row({r.omega, r.sigma_max, r.herm_min, r.margin_13, r.margin_14, r.margin_21, r.margin_23});
    }
    return out;
}

std::string timeseries_csv(const CaseFile& c, const ClosedLoopModel& model, const SimulationResult& res) {
    std::string out = provenance_header(c, "timeseries");
    std::vector<Eigen::Index> converters;
    std::string header = "t";
    for (int id : res.bus_ids) {
        header += ",f_" + std::to_string(id);
    }
    header += ",f_bar";
    for (int id : res.bus_ids) {
        header += ",f_dev_" + std::to_string(id);
    }
    for (std::size_t i = 0; i < model.size(); ++i) {
        if (is_converter(model.buses[i].kind)) {
            converters.push_back(static_cast<Eigen::Index>(i));
            header += ",v_" + std::to_string(res.bus_ids[i]);
        }
    }
    out += header + '\n';
    const auto n = static_cast<Eigen::Index>(res.bus_ids.size());
    std::vector<double> values;
    for (std::size_t k = 0; k < res.samples(); ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        values.clear();
        values.push_back(res.t[k]);
        for (Eigen::Index i = 0; i < n; ++i) {
            values.push_back(res.f_hz(row, i));
        }
        values.push_back(res.f_bar(row));
        for (Eigen::Index i = 0; i < n; ++i) {
            values.push_back(res.f_dev(row, i));
        }
        for (Eigen::Index i : converters) {
            values.push_back(res.z(row, i));
        }
        out += csv_row(values);
    }
    return out;
}

}  // namespace hybridstab
