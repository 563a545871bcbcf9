#include "hybridstab/buslib.hpp"

#include "hybridstab/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

namespace hybridstab {

namespace {

enum class Sign { Positive, NonNegative };

struct ParamSpec {
    const char* name;
    Sign sign;
    bool required;
};

struct KindInfo {
    BusKind kind;
    const char* name;
    std::vector<ParamSpec> params;
};

const std::array<const char*, 8> kDamperFields = {
    "X", "Xd_p", "Xd_pp", "Td_pp", "Xq_p", "Xq_pp", "Tq_pp", "b_stator"};

const std::vector<KindInfo>& kind_table() {
    using S = Sign;
    static const std::vector<KindInfo> table = {
        {BusKind::SG_governor, "SG_governor",
         {{"Jw0", S::Positive, true}, {"tau", S::NonNegative, true}, {"kg", S::NonNegative, true}}},
        {BusKind::SyncCondenser, "SyncCondenser", {{"Jw0", S::Positive, true}}},
        {BusKind::Wind_SG, "Wind_SG",
         {{"Jw0", S::Positive, true},
          {"kw_wind", S::NonNegative, true},
          {"kbeta", S::NonNegative, true},
          {"kp_pitch", S::NonNegative, true},
          {"tau_beta", S::NonNegative, true}}},
        {BusKind::PV_dualport_MPP, "PV_dualport_MPP",
         {{"Cdc", S::Positive, true}, {"kw", S::Positive, true}, {"kp", S::Positive, true}}},
        {BusKind::PV_dualport_offMPP, "PV_dualport_offMPP",
         {{"Cdc", S::Positive, true},
          {"kpv", S::Positive, true},
          {"kw", S::Positive, true},
          {"kp", S::Positive, true}}},
        {BusKind::HVDC_dualport, "HVDC_dualport",
         {{"Cdc", S::Positive, true}, {"kw", S::Positive, true}, {"kp", S::Positive, true}}},
        {BusKind::Battery_VSM, "Battery_VSM",
         {{"Cdc", S::Positive, true},
          {"kbatt", S::NonNegative, true},
          {"mp", S::Positive, true},
          {"T", S::NonNegative, true}}},
        {BusKind::Battery_droop, "Battery_droop",
         {{"Cdc", S::Positive, true}, {"kbatt", S::NonNegative, true}, {"mp", S::Positive, true}}},
        {BusKind::GFL_droop, "GFL_droop",
         {{"pll_kp", S::Positive, true},
          {"pll_ki", S::Positive, true},
          {"D", S::Positive, true},
          {"tau_d", S::Positive, true}}},
        {BusKind::Passive, "Passive", {}},
    };
    return table;
}

const KindInfo& info(BusKind kind) {
    for (const auto& k : kind_table()) {
        if (k.kind == kind) {
            return k;
        }
    }
    throw Error("unknown bus kind");
}

double get(const ParamMap& p, const char* name) {
    return p.at(name);
}

void check_sign(const std::string& name, double v, Sign sign) {
    if (!std::isfinite(v)) {
        throw ParameterError("parameter '" + name + "' is not finite", name);
    }
    if (sign == Sign::Positive && !(v > 0.0)) {
        throw ParameterError("parameter '" + name + "' must be > 0", name);
    }
    if (sign == Sign::NonNegative && !(v >= 0.0)) {
        throw ParameterError("parameter '" + name + "' must be >= 0", name);
    }
}

// Machines take either a direct `gamma` or the full damper data set.
double machine_gamma(const ParamMap& p) {
    const bool direct = p.contains("gamma");
    const auto n_damper = std::count_if(kDamperFields.begin(), kDamperFields.end(),
                                        [&](const char* f) { return p.contains(f); });
    if (direct && n_damper > 0) {
        throw ParameterError("give either 'gamma' or the damper data set, not both", "gamma");
    }
    if (direct) {
        check_sign("gamma", p.at("gamma"), Sign::NonNegative);
        return p.at("gamma");
    }
    if (n_damper == 0) {
        throw ParameterError("machine bus needs 'gamma' or damper data (X, Xd_p, ...)", "gamma");
    }
    for (const char* f : kDamperFields) {
        if (!p.contains(f)) {
            throw ParameterError(std::string("missing damper parameter '") + f + "'", f);
        }
    }
    DamperParams d;
    d.X = p.at("X");
    d.Xd_p = p.at("Xd_p");
    d.Xd_pp = p.at("Xd_pp");
    d.Td_pp = p.at("Td_pp");
    d.Xq_p = p.at("Xq_p");
    d.Xq_pp = p.at("Xq_pp");
    d.Tq_pp = p.at("Tq_pp");
    d.b_stator = p.at("b_stator");
    return damping_coefficient(d).gamma;
}

RationalFunction swing(double jw0) {
    return {Polynomial::constant(1.0), Polynomial({0.0, jw0})};
}

RationalFunction damper(double gamma) {
    return {Polynomial({1.0, gamma}), Polynomial::constant(1.0)};
}

RationalFunction dual_port(double kw, double kp) {
    return {Polynomial({kw, kp}), Polynomial::constant(1.0)};
}

}  // namespace

std::string_view to_string(BusKind kind) {
    return info(kind).name;
}

std::optional<BusKind> bus_kind_from_string(std::string_view name) {
    for (const auto& k : kind_table()) {
        if (name == k.name) {
            return k.kind;
        }
    }
    return std::nullopt;
}

const std::vector<BusKind>& all_bus_kinds() {
    static const std::vector<BusKind> kinds = [] {
        std::vector<BusKind> out;
        for (const auto& k : kind_table()) {
            out.push_back(k.kind);
        }
        return out;
    }();
    return kinds;
}

bool is_converter(BusKind kind) {
    switch (kind) {
        case BusKind::PV_dualport_MPP:
        case BusKind::PV_dualport_offMPP:
        case BusKind::HVDC_dualport:
        case BusKind::Battery_VSM:
        case BusKind::Battery_droop:
        case BusKind::GFL_droop:
            return true;
        default:
            return false;
    }
}

bool is_machine(BusKind kind) {
    return kind == BusKind::SG_governor || kind == BusKind::SyncCondenser ||
           kind == BusKind::Wind_SG;
}

DampingCoefficients damping_coefficient(const DamperParams& p) {
    const std::array<std::pair<const char*, double>, 8> fields = {{{"X", p.X},
                                                                   {"Xd_p", p.Xd_p},
                                                                   {"Xd_pp", p.Xd_pp},
                                                                   {"Td_pp", p.Td_pp},
                                                                   {"Xq_p", p.Xq_p},
                                                                   {"Xq_pp", p.Xq_pp},
                                                                   {"Tq_pp", p.Tq_pp},
                                                                   {"b_stator", p.b_stator}}};
    for (const auto& [name, v] : fields) {
        check_sign(name, v, Sign::Positive);
    }
    if (p.Xd_pp > p.Xd_p) {
        throw ParameterError("subtransient reactance Xd_pp exceeds transient Xd_p", "Xd_pp");
    }
    if (p.Xq_pp > p.Xq_p) {
        throw ParameterError("subtransient reactance Xq_pp exceeds transient Xq_p", "Xq_pp");
    }
    DampingCoefficients out;
    const double sd = p.X + p.Xd_p;
    const double sq = p.X + p.Xq_p;
    out.Dd = (p.Xd_p - p.Xd_pp) / (sd * sd) * (p.Xd_p / p.Xd_pp) * p.Td_pp;
    out.Dq = (p.Xq_p - p.Xq_pp) / (sq * sq) * (p.Xq_p / p.Xq_pp) * p.Tq_pp;
    out.D = 0.5 * (out.Dd + out.Dq);
    out.gamma = out.D / p.b_stator;
    return out;
}

std::vector<std::string> accepted_params(BusKind kind) {
    std::vector<std::string> out;
    for (const auto& ps : info(kind).params) {
        out.emplace_back(ps.name);
    }
    if (is_machine(kind)) {
        out.emplace_back("gamma");
        for (const char* f : kDamperFields) {
            out.emplace_back(f);
        }
    }
    return out;
}

BusModel make_bus(BusKind kind, const ParamMap& params) {
    const KindInfo& ki = info(kind);
    const auto accepted = accepted_params(kind);
    for (const auto& [name, value] : params) {
        if (std::find(accepted.begin(), accepted.end(), name) == accepted.end()) {
            throw ParameterError("parameter '" + name + "' is not accepted by kind " + ki.name, name);
        }
    }
    for (const auto& ps : ki.params) {
        if (!params.contains(ps.name)) {
            if (ps.required) {
                throw ParameterError(std::string("missing parameter '") + ps.name + "' for kind " +
                                         ki.name,
                                     ps.name);
            }
            continue;
        }
        check_sign(ps.name, params.at(ps.name), ps.sign);
    }

    BusModel bus;
    bus.kind = kind;
    bus.params = params;
    const ParamMap& p = params;

    switch (kind) {
        case BusKind::SG_governor: {
            const double jw0 = get(p, "Jw0");
            const double tau = get(p, "tau");
            const double kg = get(p, "kg");
            bus.g = RationalFunction(Polynomial({1.0, tau}), Polynomial({kg, jw0, jw0 * tau}));
            bus.k = damper(machine_gamma(p));
            break;
        }
        case BusKind::SyncCondenser:
            bus.g = swing(get(p, "Jw0"));
            bus.k = damper(machine_gamma(p));
            break;
        case BusKind::Wind_SG: {
            const double kw = get(p, "kw_wind");
            const double kbeta = get(p, "kbeta");
            const double kpp = get(p, "kp_pitch");
            const double tb = get(p, "tau_beta");
            // g_gen = -kw - kbeta*kp_pitch / (tau_beta s + 1)
            const RationalFunction ggen(Polynomial({-(kw + kbeta * kpp), -kw * tb}),
                                        Polynomial({1.0, tb}));
            bus.g = feedback(swing(get(p, "Jw0")), ggen);
            bus.k = damper(machine_gamma(p));
            break;
        }
        case BusKind::PV_dualport_MPP:
        case BusKind::HVDC_dualport:
            bus.g = RationalFunction(Polynomial::constant(1.0), Polynomial({0.0, get(p, "Cdc")}));
            bus.k = dual_port(get(p, "kw"), get(p, "kp"));
            break;
        case BusKind::PV_dualport_offMPP: {
            // 1/(Cdc s) closed with g_gen = -kpv
            bus.g = feedback(RationalFunction(Polynomial::constant(1.0),
                                              Polynomial({0.0, get(p, "Cdc")})),
                             RationalFunction(-get(p, "kpv")));
            bus.k = dual_port(get(p, "kw"), get(p, "kp"));
            break;
        }
        case BusKind::Battery_VSM:
        case BusKind::Battery_droop: {
            const double c = get(p, "Cdc");
            const double kb = get(p, "kbatt");
            const double mp = get(p, "mp");
            const double t = kind == BusKind::Battery_VSM ? get(p, "T") : 0.0;
            bus.g = RationalFunction(Polynomial::constant(1.0), Polynomial({kb, c}));
            bus.k = RationalFunction(Polynomial({mp * kb, mp * c}), Polynomial({1.0, t}));
            break;
        }
        case BusKind::GFL_droop: {
            // Only the product g*k is known; it is stored on g with k = 1.
            const double kp = get(p, "pll_kp");
            const double ki = get(p, "pll_ki");
            const double d = get(p, "D");
            const double td = get(p, "tau_d");
            bus.g = RationalFunction(Polynomial({ki, kp, 1.0}) * Polynomial({1.0, td}),
                                     Polynomial({ki * d, kp * d}));
            bus.k = RationalFunction(1.0);
            break;
        }
        case BusKind::Passive:
            bus.g = RationalFunction(0.0);
            bus.k = RationalFunction(1.0);
            return bus;
    }
    bus.k_inv = inverse(bus.k);
    bus.gk_inv = inverse(bus.g * bus.k);
    return bus;
}

double bus_xi(const BusModel& bus, Complex s) {
    if (bus.passive()) {
        throw Error("damping margin is undefined for a passive bus");
    }
    return bus.gk_inv(s).real();
}

}  // namespace hybridstab
