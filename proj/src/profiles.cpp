#include "feederopt/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace feederopt {

TimeGrid::TimeGrid(int slots_per_hour_) {
    if (slots_per_hour_ < 1) throw std::invalid_argument("TimeGrid: slots_per_hour must be >= 1");
    slots_per_hour = slots_per_hour_;
    T = 24 * slots_per_hour;
    dt_hours = 1.0 / slots_per_hour;
}

bool NodeProfiles::is_pv(int node) const {
    return std::binary_search(pv_nodes.begin(), pv_nodes.end(), node);
}

std::vector<double> expand_to_slots(const HourlySeries& series, const TimeGrid& grid) {
    std::vector<double> out(grid.T);
    for (int t = 0; t < grid.T; ++t) {
        out[t] = series.values[t / grid.slots_per_hour];
    }
    return out;
}

NodeProfiles build_node_profiles(const HourlySeries& demand, const HourlySeries& solar,
                                 double demand_scale, double solar_scale,
                                 const PerUnitBase& base, const PvPlacement& placement,
                                 int n, double s_max, const TimeGrid& grid,
                                 std::optional<double> demand_pf) {
    if (!(demand_scale > 0.0) || !(solar_scale > 0.0)) {
        throw std::invalid_argument("build_node_profiles: scale factors must be positive");
    }
    if (!(s_max > 0.0)) throw std::invalid_argument("build_node_profiles: s_max must be positive");
    if (n <= 0) throw std::invalid_argument("build_node_profiles: n must be positive");
    if (!placement.pv_nodes.empty() && placement.pv_nodes.back() > n) {
        throw std::invalid_argument("build_node_profiles: placement node exceeds n");
    }
    if (demand_pf && (!(*demand_pf > 0.0) || *demand_pf > 1.0)) {
        throw std::invalid_argument("build_node_profiles: demand_pf must be in (0, 1]");
    }

    NodeProfiles np;
    np.grid = grid;
    np.n = n;
    np.pv_nodes = placement.pv_nodes;

    const int T = grid.T;
    np.p_c.assign(n + 1, std::vector<double>(T, 0.0));
    np.q_c.assign(n + 1, std::vector<double>(T, 0.0));
    np.p_g.assign(n + 1, std::vector<double>(T, 0.0));
    np.q_g_max.assign(n + 1, std::vector<double>(T, 0.0));
    np.s.assign(n + 1, 0.0);

    std::vector<double> demand_pu = expand_to_slots(demand, grid);
    std::vector<double> solar_pu = expand_to_slots(solar, grid);
    for (double& v : demand_pu) v = base.power_to_pu(v / demand_scale);
    for (double& v : solar_pu) v = base.power_to_pu(v / solar_scale);

    const double pf = demand_pf.value_or(1.0);
    const double qf = demand_pf ? std::sqrt(std::max(0.0, 1.0 - pf * pf)) : 1.0;

    // Node 0 is the substation: no load, no PV.
    for (int j = 1; j <= n; ++j) {
        for (int t = 0; t < T; ++t) {
            np.p_c[j][t] = demand_pu[t] * pf;
            np.q_c[j][t] = demand_pu[t] * qf;
        }
    }

    if (s_max < 1.0) {
        np.warnings.push_back(
            "s_max < 1: inverter rating below peak generation, VAR capability clamped to zero "
            "at peak-generation slots");
    }

    const double solar_peak = *std::max_element(solar_pu.begin(), solar_pu.end());
    for (int j : placement.pv_nodes) {
        np.p_g[j] = solar_pu;
        np.s[j] = s_max * solar_peak;
        for (int t = 0; t < T; ++t) {
            const double margin = np.s[j] * np.s[j] - np.p_g[j][t] * np.p_g[j][t];
            np.q_g_max[j][t] = std::sqrt(std::max(0.0, margin));
        }
    }
    return np;
}

double battery_capacity(double daily_kwh, double fraction, double scale,
                        const PerUnitBase& base) {
    if (daily_kwh < 0.0 || !(fraction > 0.0) || !(scale > 0.0)) {
        throw std::invalid_argument("battery_capacity: arguments must be positive");
    }
    const double scaled_wh = daily_kwh * 1000.0 * fraction / scale;
    return scaled_wh * base.z_base_ohm();
}

DayProfile load_profile_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open profile CSV: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty profile CSV: " + path);
    // Tolerate a UTF-8 BOM and trailing CR.
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "hour,demand_w,solar_w") {
        throw std::runtime_error("profile CSV must start with header 'hour,demand_w,solar_w'");
    }

    DayProfile profile;
    int rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string hour_s, demand_s, solar_s;
        if (!std::getline(ss, hour_s, ',') || !std::getline(ss, demand_s, ',') ||
            !std::getline(ss, solar_s)) {
            throw std::runtime_error("malformed profile CSV row: " + line);
        }
        int hour = 0;
        double demand = 0.0, solar = 0.0;
        try {
            hour = std::stoi(hour_s);
            demand = std::stod(demand_s);
            solar = std::stod(solar_s);
        } catch (const std::exception&) {
            throw std::runtime_error("malformed profile CSV row: " + line);
        }
        if (hour < 1 || hour > 24) throw std::runtime_error("profile CSV hour out of 1..24");
        profile.demand.values[hour - 1] = demand;
        profile.solar.values[hour - 1] = solar;
        ++rows;
    }
    if (rows != 24) {
        throw std::runtime_error("profile CSV must have 24 data rows, got " + std::to_string(rows));
    }
    return profile;
}

void write_profile_csv(const DayProfile& profile, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write profile CSV: " + path);
    out << "hour,demand_w,solar_w\n";
    out.precision(10);
    for (int h = 0; h < 24; ++h) {
        out << (h + 1) << ',' << profile.demand.values[h] << ',' << profile.solar.values[h] << '\n';
    }
}

DayProfile synthetic_default_profile() {
    DayProfile p;
    // Aggregate demand in watts, 1e10 scale. Evening peak at hour 20 lands
    // in slots 58..60 of a 72-slot day.
    static constexpr std::array<double, 24> kDemand = {
        1.80e10, 1.72e10, 1.66e10, 1.62e10, 1.60e10, 1.63e10,  // overnight trough
        1.72e10, 1.82e10, 1.90e10, 1.95e10, 1.98e10, 2.00e10,  // morning rise
        2.02e10, 2.03e10, 2.05e10, 2.08e10, 2.15e10, 2.28e10,  // afternoon
        2.40e10, 2.46e10, 2.42e10, 2.28e10, 2.10e10, 1.92e10,  // evening peak, decline
    };
    // Aggregate solar in watts: midday bell, zero overnight.
    static constexpr std::array<double, 24> kSolar = {
        0.0,    0.0,    0.0,    0.0,    0.0,    0.0,     //
        1.2e7,  7.5e7,  1.80e8, 2.80e8, 3.55e8, 3.95e8,  //
        4.00e8, 3.70e8, 3.05e8, 2.20e8, 1.25e8, 4.5e7,   //
        5.0e6,  0.0,    0.0,    0.0,    0.0,    0.0,     //
    };
    p.demand.values = kDemand;
    p.solar.values = kSolar;
    return p;
}

}  // namespace feederopt
