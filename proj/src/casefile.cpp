#include "hybridstab/casefile.hpp"

#include "hybridstab/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hybridstab {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

int line_at(const std::string& text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

// Line of the `"id": <id>` entry of a bus, 0 if it cannot be found.
int line_of_bus(const std::string& text, int id) {
    static const std::regex re(R"re("id"\s*:\s*(-?\d+))re");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
        if (std::stoi((*it)[1].str()) == id) {
            return line_at(text, static_cast<std::size_t>(it->position()));
        }
    }
    return 0;
}

class Reader {
public:
    explicit Reader(const std::string& text) : text_(text) {}

    void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) const {
        if (!obj.is_object()) {
            fail(where + " must be an object");
        }
        for (const auto& [key, value] : obj.items()) {
            (void)value;
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
                fail("unknown key '" + key + "' in " + where);
            }
        }
    }

    double number(const json& obj, const char* key, const std::string& where, std::optional<double> fallback = {}) const {
        if (!obj.contains(key)) {
            if (fallback) {
                return *fallback;
            }
            fail("missing '" + std::string(key) + "' in " + where);
        }
        const json& v = obj.at(key);
        if (!v.is_number()) {
            fail("'" + std::string(key) + "' in " + where + " must be a number");
        }
        const double d = v.get<double>();
        if (!std::isfinite(d)) {
            fail("'" + std::string(key) + "' in " + where + " is not finite");
        }
        return d;
    }

    int integer(const json& obj, const char* key, const std::string& where, std::optional<int> fallback = {}) const {
        if (!obj.contains(key)) {
            if (fallback) {
                return *fallback;
            }
            fail("missing '" + std::string(key) + "' in " + where);
        }
        const json& v = obj.at(key);
        if (!v.is_number_integer()) {
            fail("'" + std::string(key) + "' in " + where + " must be an integer");
        }
        return v.get<int>();
    }

    std::string string(const json& obj, const char* key, const std::string& where, std::optional<std::string> fallback = {}) const {
        if (!obj.contains(key)) {
            if (fallback) {
                return *fallback;
            }
            fail("missing '" + std::string(key) + "' in " + where);
        }
        const json& v = obj.at(key);
        if (!v.is_string()) {
            fail("'" + std::string(key) + "' in " + where + " must be a string");
        }
        return v.get<std::string>();
    }

    const json& array(const json& root, const char* key, bool required) const {
        static const json empty = json::array();
        if (!root.contains(key)) {
            if (required) {
                fail("missing section '" + std::string(key) + "'");
            }
            return empty;
        }
        const json& v = root.at(key);
        if (!v.is_array()) {
            fail("section '" + std::string(key) + "' must be an array");
        }
        return v;
    }

    [[noreturn]] void fail(const std::string& what, int line = 0) const { throw CaseError(what, line); }
    [[noreturn]] void fail_bus(const std::string& what, int id) const { throw CaseError(what, line_of_bus(text_, id)); }

private:
    const std::string& text_;
};

std::string unit_name(FrequencyUnit u) {
    return u == FrequencyUnit::PerUnit ? "pu" : "rad_s";
}

std::string format_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

AnalysisOptions CaseFile::analysis_options() const {
    AnalysisOptions o;
    o.delta = analysis.delta;
    o.grid_min = analysis.grid_min;
    o.grid_max = analysis.grid_max;
    o.grid_points = analysis.grid_points;
    return o;
}

CaseFile parse_case_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw CaseError(std::string("malformed case file: ") + e.what(), line_at(text, e.byte));
    }
    const Reader rd(text);
    rd.check_keys(root, "case", {"meta", "buses", "ac_lines", "dc_lines", "disturbances", "analysis"});

    CaseFile c;
    if (root.contains("meta")) {
        const json& m = root.at("meta");
        rd.check_keys(m, "meta", {"name", "base_mva", "base_frequency_hz", "frequency_unit", "source", "notes"});
        c.meta.name = rd.string(m, "name", "meta", std::string());
        c.meta.base_mva = rd.number(m, "base_mva", "meta", 100.0);
        c.meta.base_frequency_hz = rd.number(m, "base_frequency_hz", "meta", 50.0);
        const std::string unit = rd.string(m, "frequency_unit", "meta", std::string("rad_s"));
        if (unit == "pu") {
            c.meta.frequency_unit = FrequencyUnit::PerUnit;
        } else if (unit == "rad_s") {
            c.meta.frequency_unit = FrequencyUnit::RadPerSecond;
        } else {
            rd.fail("meta.frequency_unit must be \"pu\" or \"rad_s\", got \"" + unit + "\"");
        }
        c.meta.source = rd.string(m, "source", "meta", std::string());
        c.meta.notes = rd.string(m, "notes", "meta", std::string());
        if (!(c.meta.base_mva > 0.0) || !(c.meta.base_frequency_hz > 0.0)) {
            rd.fail("meta.base_mva and meta.base_frequency_hz must be positive");
        }
    }

    const json& buses = rd.array(root, "buses", true);
    if (buses.empty()) {
        rd.fail("section 'buses' is empty");
    }
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const json& b = buses[i];
        const std::string where = "buses[" + std::to_string(i) + "]";
        rd.check_keys(b, where, {"id", "kind", "params", "p_load"});
        BusEntry e;
        e.id = rd.integer(b, "id", where);
        const std::string kind = rd.string(b, "kind", where);
        const auto k = bus_kind_from_string(kind);
        if (!k) {
            rd.fail_bus("bus " + std::to_string(e.id) + ": unknown kind '" + kind + "'", e.id);
        }
        ParamMap params;
        if (b.contains("params")) {
            const json& p = b.at("params");
            if (!p.is_object()) {
                rd.fail_bus("bus " + std::to_string(e.id) + ": params must be an object", e.id);
            }
            for (const auto& [key, value] : p.items()) {
                if (!value.is_number()) {
                    rd.fail_bus("bus " + std::to_string(e.id) + ": parameter '" + key + "' must be a number", e.id);
                }
                params[key] = value.get<double>();
            }
        }
        try {
            e.model = make_bus(*k, params);
        } catch (const ParameterError& err) {
            rd.fail_bus("bus " + std::to_string(e.id) + ": " + err.what(), e.id);
        }
        e.p_load = rd.number(b, "p_load", where, 0.0);
        c.network.buses.push_back(std::move(e));
    }

    const json& ac = rd.array(root, "ac_lines", false);
    for (std::size_t i = 0; i < ac.size(); ++i) {
        const std::string where = "ac_lines[" + std::to_string(i) + "]";
        rd.check_keys(ac[i], where, {"from", "to", "b"});
        c.network.ac_edges.push_back({rd.integer(ac[i], "from", where), rd.integer(ac[i], "to", where),
                                      rd.number(ac[i], "b", where)});
    }
    const json& dc = rd.array(root, "dc_lines", false);
    for (std::size_t i = 0; i < dc.size(); ++i) {
        const std::string where = "dc_lines[" + std::to_string(i) + "]";
        rd.check_keys(dc[i], where, {"from", "to", "g"});
        c.network.dc_edges.push_back({rd.integer(dc[i], "from", where), rd.integer(dc[i], "to", where),
                                      rd.number(dc[i], "g", where)});
    }
    const json& dist = rd.array(root, "disturbances", false);
    for (std::size_t i = 0; i < dist.size(); ++i) {
        const std::string where = "disturbances[" + std::to_string(i) + "]";
        rd.check_keys(dist[i], where, {"bus", "magnitude", "time"});
        c.network.disturbances.push_back({rd.integer(dist[i], "bus", where), rd.number(dist[i], "magnitude", where),
                                          rd.number(dist[i], "time", where, 0.0)});
    }

    if (root.contains("analysis")) {
        const json& a = root.at("analysis");
        rd.check_keys(a, "analysis", {"delta", "grid_min", "grid_max", "grid_points", "dt", "t_end"});
        const CaseAnalysis d;
        c.analysis.delta = rd.number(a, "delta", "analysis", d.delta);
        c.analysis.grid_min = rd.number(a, "grid_min", "analysis", d.grid_min);
        c.analysis.grid_max = rd.number(a, "grid_max", "analysis", d.grid_max);
        c.analysis.grid_points = rd.integer(a, "grid_points", "analysis", d.grid_points);
        c.analysis.dt = rd.number(a, "dt", "analysis", d.dt);
        c.analysis.t_end = rd.number(a, "t_end", "analysis", d.t_end);
        const auto& an = c.analysis;
        if (!(an.delta > 0.0) || !(an.grid_min > 0.0) || !(an.grid_max > an.grid_min) || an.grid_points < 2 ||
            !(an.dt > 0.0) || !(an.t_end > 0.0)) {
            rd.fail("analysis needs delta, grid_min, dt, t_end > 0, grid_max > grid_min and grid_points >= 2");
        }
    }

    c.network.angle_scale =
        c.meta.frequency_unit == FrequencyUnit::PerUnit ? 2.0 * std::numbers::pi * c.meta.base_frequency_hz : 1.0;
    try {
        c.network.validate();
    } catch (const NetworkError& err) {
        // Name the first bus id mentioned in the message, if any.
        static const std::regex bus_re(R"(bus (-?\d+))");
        std::smatch m;
        const std::string msg = err.what();
        int line = 0;
        if (std::regex_search(msg, m, bus_re)) {
            line = line_of_bus(text, std::stoi(m[1].str()));
        }
        throw CaseError(msg, line);
    }
    return c;
}

CaseFile parse_case(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CaseError("cannot read case file " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_case_text(ss.str());
    } catch (const CaseError& e) {
        const std::string at = e.line() > 0 ? ":" + std::to_string(e.line()) : "";
        throw CaseError(path.string() + at + ": " + e.what(), e.line());
    }
}

std::string serialize_case(const CaseFile& c) {
    ojson root;
    root["meta"] = ojson{{"name", c.meta.name},
                         {"base_mva", c.meta.base_mva},
                         {"base_frequency_hz", c.meta.base_frequency_hz},
                         {"frequency_unit", unit_name(c.meta.frequency_unit)},
                         {"source", c.meta.source},
                         {"notes", c.meta.notes}};
    root["buses"] = ojson::array();
    for (const auto& b : c.network.buses) {
        ojson params = ojson::object();
        for (const auto& [k, v] : b.model.params) {
            params[k] = v;
        }
        root["buses"].push_back(
            ojson{{"id", b.id}, {"kind", std::string(to_string(b.model.kind))}, {"params", params}, {"p_load", b.p_load}});
    }
    root["ac_lines"] = ojson::array();
    for (const auto& e : c.network.ac_edges) {
        root["ac_lines"].push_back(ojson{{"from", e.from}, {"to", e.to}, {"b", e.b}});
    }
    root["dc_lines"] = ojson::array();
    for (const auto& e : c.network.dc_edges) {
        root["dc_lines"].push_back(ojson{{"from", e.from}, {"to", e.to}, {"g", e.g}});
    }
    root["disturbances"] = ojson::array();
    for (const auto& d : c.network.disturbances) {
        root["disturbances"].push_back(ojson{{"bus", d.bus}, {"magnitude", d.magnitude}, {"time", d.time}});
    }
    root["analysis"] = ojson{{"delta", c.analysis.delta},
                             {"grid_min", c.analysis.grid_min},
                             {"grid_max", c.analysis.grid_max},
                             {"grid_points", c.analysis.grid_points},
                             {"dt", c.analysis.dt},
                             {"t_end", c.analysis.t_end}};
    return root.dump(2) + "\n";
}

std::string case_hash(const CaseFile& c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : serialize_case(c)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return format_hex(h);
}

CaseReduction reduce_case(const CaseFile& c, std::vector<int> keep) {
    const NetworkCase& net = c.network;
    if (keep.empty()) {
        for (const auto& b : net.buses) {
            if (!b.model.passive()) {
                keep.push_back(b.id);
            }
        }
    }
    std::set<int> keep_set(keep.begin(), keep.end());
    std::vector<std::size_t> keep_idx;
    for (int id : keep_set) {
        const std::size_t idx = net.index_of(id);
        if (net.buses[idx].model.passive()) {
            throw NetworkError("bus " + std::to_string(id) + " is passive and cannot be kept");
        }
        keep_idx.push_back(idx);
    }
    for (std::size_t i = 0; i < net.size(); ++i) {
        if (!keep_set.contains(net.buses[i].id) && !net.buses[i].model.passive()) {
            throw NetworkError("bus " + std::to_string(net.buses[i].id) + " (kind " +
                               std::string(to_string(net.buses[i].model.kind)) +
                               ") has dynamics and cannot be eliminated");
        }
    }

    std::vector<std::tuple<std::size_t, std::size_t, double>> edges;
    for (const auto& e : net.ac_edges) {
        edges.emplace_back(net.index_of(e.from), net.index_of(e.to), e.b);
    }
    CaseReduction out;
    out.kron = kron_reduce(laplacian_from_edges(net.size(), edges), keep_idx);
    const auto& K = out.kron;

    CaseFile r;
    r.meta = c.meta;
    r.analysis = c.analysis;
    r.network.angle_scale = net.angle_scale;

    const auto nk = static_cast<Eigen::Index>(K.keep.size());
    Eigen::VectorXd load(static_cast<Eigen::Index>(net.size()));
    for (std::size_t i = 0; i < net.size(); ++i) {
        load(static_cast<Eigen::Index>(i)) = net.buses[i].p_load;
    }
    const Eigen::VectorXd mapped_load = K.load_map * load;
    for (Eigen::Index a = 0; a < nk; ++a) {
        BusEntry e = net.buses[K.keep[static_cast<std::size_t>(a)]];
        e.p_load = mapped_load(a);
        r.network.buses.push_back(e);
    }

    const double scale = K.reduced.cwiseAbs().maxCoeff();
    for (Eigen::Index a = 0; a < nk; ++a) {
        for (Eigen::Index b = a + 1; b < nk; ++b) {
            const double w = -K.reduced(a, b);
            if (w > 1e-12 * scale) {
                r.network.ac_edges.push_back({r.network.buses[static_cast<std::size_t>(a)].id,
                                              r.network.buses[static_cast<std::size_t>(b)].id, w});
            }
        }
    }
    r.network.dc_edges = net.dc_edges;

    std::map<double, Eigen::VectorXd> by_time;
    for (const auto& d : net.disturbances) {
        auto [it, inserted] = by_time.try_emplace(d.time, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.size())));
        (void)inserted;
        it->second(static_cast<Eigen::Index>(net.index_of(d.bus))) += d.magnitude;
    }
    std::ostringstream weights;
    for (const auto& [t, p] : by_time) {
        const Eigen::VectorXd m = K.load_map * p;
        const double mscale = std::max(1e-300, m.cwiseAbs().maxCoeff());
        for (Eigen::Index a = 0; a < nk; ++a) {
            if (std::abs(m(a)) > 1e-15 * mscale) {
                r.network.disturbances.push_back({r.network.buses[static_cast<std::size_t>(a)].id, m(a), t});
            }
        }
    }

    std::ostringstream notes;
    notes << "Kron-reduced onto buses";
    for (const auto& b : r.network.buses) {
        notes << ' ' << b.id;
    }
    notes << "; eliminated";
    for (const auto& b : net.buses) {
        if (!keep_set.contains(b.id)) {
            notes << ' ' << b.id;
        }
    }
    notes << ". Loads and disturbances mapped with the Kron weights -L_ke L_ee^{-1}.";
    if (!c.meta.notes.empty()) {
        notes << ' ' << c.meta.notes;
    }
    r.meta.notes = notes.str();
    r.network.validate();
    out.reduced = std::move(r);
    return out;
}

}  // namespace hybridstab
