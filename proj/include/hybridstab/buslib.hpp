#pragma once

// Catalog of bus technologies. Every kind reduces to a pair (g(s), k(s)):
// g maps net power into the bus to the intermediate signal z (DC voltage
// for converters, undamped rotor speed for machines) and k maps z to the AC
// frequency.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hybridstab/ratfun.hpp"

namespace hybridstab {

enum class BusKind {
    SG_governor,
    SyncCondenser,
    Wind_SG,
    PV_dualport_MPP,
    PV_dualport_offMPP,
    HVDC_dualport,
    Battery_VSM,
    Battery_droop,
    GFL_droop,
    /// Network node without dynamics; only valid as a Kron-reduction interior.
    Passive,
};

[[nodiscard]] std::string_view to_string(BusKind kind);
[[nodiscard]] std::optional<BusKind> bus_kind_from_string(std::string_view name);
[[nodiscard]] const std::vector<BusKind>& all_bus_kinds();

[[nodiscard]] bool is_converter(BusKind kind);
[[nodiscard]] bool is_machine(BusKind kind);

using ParamMap = std::map<std::string, double>;

/// Machine data for the damper-winding coefficients. Reactances in p.u.,
/// time constants in seconds, `b_stator` is the rotor-to-terminal susceptance.
struct DamperParams {
    double X = 0.0;
    double Xd_p = 0.0;
    double Xd_pp = 0.0;
    double Td_pp = 0.0;
    double Xq_p = 0.0;
    double Xq_pp = 0.0;
    double Tq_pp = 0.0;
    double b_stator = 0.0;
};

struct DampingCoefficients {
    double Dd = 0.0;
    double Dq = 0.0;
    double D = 0.0;      ///< (Dd + Dq) / 2
    double gamma = 0.0;  ///< D / b_stator, seconds
};

/// d/q damping coefficients of the damper windings and the resulting
/// time constant gamma of k(s) = 1 + gamma*s.
[[nodiscard]] DampingCoefficients damping_coefficient(const DamperParams& p);

struct BusModel {
    BusKind kind = BusKind::Passive;
    ParamMap params;
    RationalFunction g;
    RationalFunction k{1.0};
    /// g^{-1} k^{-1}; its real part on the imaginary axis is the bus damping margin.
    RationalFunction gk_inv{0.0};
    RationalFunction k_inv{1.0};

    [[nodiscard]] bool converter() const { return is_converter(kind); }
    [[nodiscard]] bool machine() const { return is_machine(kind); }
    [[nodiscard]] bool passive() const { return kind == BusKind::Passive; }

    friend bool operator==(const BusModel& a, const BusModel& b) {
        return a.kind == b.kind && a.params == b.params;
    }
};

/// Builds the (g, k) pair for `kind`. Throws ParameterError naming the field
/// when a required parameter is missing, unknown, or violates its sign constraint.
[[nodiscard]] BusModel make_bus(BusKind kind, const ParamMap& params);

/// Parameter names accepted by a kind (required and optional).
[[nodiscard]] std::vector<std::string> accepted_params(BusKind kind);

/// Re(g^{-1}(s) k^{-1}(s)).
[[nodiscard]] double bus_xi(const BusModel& bus, Complex s);

}  // namespace hybridstab
