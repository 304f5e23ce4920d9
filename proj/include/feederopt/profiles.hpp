#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "feederopt/feeder.hpp"
#include "feederopt/per_unit.hpp"

namespace feederopt {

/// Discrete daily time grid: T slots of equal duration dt_hours.
struct TimeGrid {
    int T = 72;
    int slots_per_hour = 3;
    double dt_hours = 1.0 / 3.0;

    TimeGrid() = default;
    explicit TimeGrid(int slots_per_hour_);
};

/// One day of hourly power values in source units (watts before scaling).
struct HourlySeries {
    std::array<double, 24> values{};
};

/// Per-node, per-slot operating data in per-unit. Index [node][slot] with
/// node in 0..n (node 0 always zero) and slot in 0..T-1.
struct NodeProfiles {
    TimeGrid grid;
    int n = 0;
    std::vector<int> pv_nodes;
    std::vector<std::vector<double>> p_c;      // real consumption
    std::vector<std::vector<double>> q_c;      // reactive consumption
    std::vector<std::vector<double>> p_g;      // real generation (pinned at capability)
    std::vector<double> s;                     // apparent power capability per node
    std::vector<std::vector<double>> q_g_max;  // VAR bound sqrt(max(0, s^2 - p_g^2))
    std::vector<std::string> warnings;

    bool is_pv(int node) const;
};

/// Step-hold expansion of an hourly series onto the slot grid: slot t takes
/// the value of its containing hour, no interpolation.
std::vector<double> expand_to_slots(const HourlySeries& series, const TimeGrid& grid);

/// Assemble per-node profiles from aggregate demand/solar series.
///
/// Every load node receives the same scaled demand; PV nodes additionally
/// receive the scaled solar series as p_g. Per-unit conversion is
/// watts / scale / s_base. With demand_pf unset, p_c = q_c = scaled demand;
/// otherwise p_c = demand*pf and q_c = demand*sqrt(1-pf^2).
/// The inverter rating is s[j] = s_max * max_t p_g[j][t]; s_max below 1
/// clamps q_g_max at generation peaks and records a warning.
NodeProfiles build_node_profiles(const HourlySeries& demand, const HourlySeries& solar,
                                 double demand_scale, double solar_scale,
                                 const PerUnitBase& base, const PvPlacement& placement,
                                 int n, double s_max, const TimeGrid& grid,
                                 std::optional<double> demand_pf = std::nullopt);

/// Battery size from a daily household energy figure, scaled like the
/// demand profile and referred through the impedance base into per-unit
/// energy (p.u. power times hours).
double battery_capacity(double daily_kwh, double fraction, double scale,
                        const PerUnitBase& base);

/// Parse a profile CSV with header `hour,demand_w,solar_w` and 24 data rows.
struct DayProfile {
    HourlySeries demand;
    HourlySeries solar;
};
DayProfile load_profile_csv(const std::string& path);
void write_profile_csv(const DayProfile& profile, const std::string& path);

/// Built-in default day: demand with a shallow overnight trough, morning
/// rise and an evening peak around hours 19-21; solar as a midday bell.
/// Magnitudes sit at utility scale so the default scale factors produce
/// house-sized per-node injections.
DayProfile synthetic_default_profile();

}  // namespace feederopt
