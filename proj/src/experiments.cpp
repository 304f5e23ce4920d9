#include "feederopt/experiments.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <json.hpp>

namespace feederopt {

namespace {

using nlohmann::json;

std::vector<double> as_double_list(const json& v, const std::string& key) {
    std::vector<double> out;
    if (v.is_number()) {
        out.push_back(v.get<double>());
    } else if (v.is_array()) {
        for (const auto& e : v) out.push_back(e.get<double>());
    } else {
        throw std::invalid_argument("config key '" + key + "' must be a number or list");
    }
    if (out.empty()) throw std::invalid_argument("config key '" + key + "' is empty");
    return out;
}

PlacementKind placement_from_string(const std::string& s) {
    if (s == "front") return PlacementKind::Front;
    if (s == "rear") return PlacementKind::Rear;
    throw std::invalid_argument("unknown placement: " + s);
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
}

}  // namespace

SweepConfig SweepConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_string(ss.str());
}

SweepConfig SweepConfig::from_json_string(const std::string& text) {
    const json j = json::parse(text);
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");

    static const std::vector<std::string> known = {
        "nodes", "length_min_m", "length_max_m", "seed", "r_ohm_per_km", "x_ohm_per_km",
        "v_base_kv", "s_base_kva", "demand_scale", "solar_scale", "demand_pf",
        "slots_per_hour", "daily_kwh", "b_max_fraction", "b_max_pu", "profile_csv",
        "epsilon", "beta_index", "terminal_soc_zero", "voltage_soft_weight", "solver_eps",
        "solver_max_iter", "s_max", "penetration", "placements", "controllers", "workers"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::invalid_argument("unknown config key: " + key);
        }
    }

    SweepConfig c;
    if (j.contains("nodes")) c.nodes = j["nodes"].get<int>();
    if (j.contains("length_min_m")) c.length_min_m = j["length_min_m"].get<double>();
    if (j.contains("length_max_m")) c.length_max_m = j["length_max_m"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("r_ohm_per_km")) c.r_ohm_per_km = j["r_ohm_per_km"].get<double>();
    if (j.contains("x_ohm_per_km")) c.x_ohm_per_km = j["x_ohm_per_km"].get<double>();
    if (j.contains("v_base_kv")) c.v_base_kv = j["v_base_kv"].get<double>();
    if (j.contains("s_base_kva")) c.s_base_kva = j["s_base_kva"].get<double>();
    if (j.contains("demand_scale")) c.demand_scale = j["demand_scale"].get<double>();
    if (j.contains("solar_scale")) c.solar_scale = j["solar_scale"].get<double>();
    if (j.contains("demand_pf")) c.demand_pf = j["demand_pf"].get<double>();
    if (j.contains("slots_per_hour")) c.slots_per_hour = j["slots_per_hour"].get<int>();
    if (j.contains("daily_kwh")) c.daily_kwh = j["daily_kwh"].get<double>();
    if (j.contains("b_max_fraction")) c.b_max_fraction = j["b_max_fraction"].get<double>();
    if (j.contains("b_max_pu")) c.b_max_pu = j["b_max_pu"].get<double>();
    if (j.contains("profile_csv")) c.profile_csv = j["profile_csv"].get<std::string>();
    if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
    if (j.contains("beta_index")) c.beta_index = j["beta_index"].get<std::string>();
    if (j.contains("terminal_soc_zero")) c.terminal_soc_zero = j["terminal_soc_zero"].get<bool>();
    if (j.contains("voltage_soft_weight")) {
        c.voltage_soft_weight = j["voltage_soft_weight"].get<double>();
    }
    if (j.contains("solver_eps")) c.solver_eps = j["solver_eps"].get<double>();
    if (j.contains("solver_max_iter")) c.solver_max_iter = j["solver_max_iter"].get<int>();
    if (j.contains("s_max")) c.s_max_grid = as_double_list(j["s_max"], "s_max");
    if (j.contains("penetration")) c.penetration_grid = as_double_list(j["penetration"], "penetration");
    if (j.contains("placements")) {
        c.placements.clear();
        for (const auto& e : j["placements"]) c.placements.push_back(placement_from_string(e));
    }
    if (j.contains("controllers")) {
        c.controllers.clear();
        for (const auto& e : j["controllers"]) {
            c.controllers.push_back(controller_from_string(e.get<std::string>()));
        }
    }
    if (j.contains("workers")) c.workers = j["workers"].get<int>();

    if (c.beta_index != "colocated" && c.beta_index != "shifted") {
        throw std::invalid_argument("beta_index must be 'colocated' or 'shifted'");
    }
    return c;
}

std::string SweepConfig::to_json_string() const {
    json j;
    j["nodes"] = nodes;
    j["length_min_m"] = length_min_m;
    j["length_max_m"] = length_max_m;
    j["seed"] = seed;
    j["r_ohm_per_km"] = r_ohm_per_km;
    j["x_ohm_per_km"] = x_ohm_per_km;
    j["v_base_kv"] = v_base_kv;
    j["s_base_kva"] = s_base_kva;
    j["demand_scale"] = demand_scale;
    j["solar_scale"] = solar_scale;
    if (demand_pf) j["demand_pf"] = *demand_pf;
    j["slots_per_hour"] = slots_per_hour;
    j["daily_kwh"] = daily_kwh;
    j["b_max_fraction"] = b_max_fraction;
    if (b_max_pu) j["b_max_pu"] = *b_max_pu;
    if (profile_csv) j["profile_csv"] = *profile_csv;
    j["epsilon"] = epsilon;
    j["beta_index"] = beta_index;
    j["terminal_soc_zero"] = terminal_soc_zero;
    j["voltage_soft_weight"] = voltage_soft_weight;
    j["solver_eps"] = solver_eps;
    j["solver_max_iter"] = solver_max_iter;
    j["s_max"] = s_max_grid;
    j["penetration"] = penetration_grid;
    std::vector<std::string> pl;
    for (auto p : placements) pl.push_back(to_string(p));
    j["placements"] = pl;
    std::vector<std::string> ct;
    for (auto k : controllers) ct.push_back(to_string(k));
    j["controllers"] = ct;
    j["workers"] = workers;
    return j.dump(2);
}

ControlOptions SweepConfig::control_options() const {
    ControlOptions opts;
    opts.epsilon = epsilon;
    opts.indexing = beta_index == "shifted" ? BetaIndexing::Shifted : BetaIndexing::Colocated;
    opts.terminal_soc_zero = terminal_soc_zero;
    opts.voltage_soft_weight = voltage_soft_weight;
    opts.solver.eps_abs = solver_eps;
    opts.solver.eps_rel = solver_eps;
    opts.solver.max_iter = solver_max_iter;
    return opts;
}

double SweepConfig::battery_size_pu() const {
    if (b_max_pu) return *b_max_pu;
    return battery_capacity(daily_kwh, b_max_fraction, demand_scale, base());
}

std::vector<ScenarioResult> run_sweep(
    const SweepConfig& config, const std::function<void(const ScenarioResult&)>& on_row,
    const std::function<void(const ScenarioSpec&, const OptimizationResult&)>& on_detail) {
    if (config.s_max_grid.empty() || config.penetration_grid.empty() ||
        config.placements.empty() || config.controllers.empty()) {
        throw std::invalid_argument("run_sweep: all sweep axes must be non-empty");
    }

    const PerUnitBase base = config.base();
    const auto lengths =
        sample_lengths(config.nodes, config.length_min_m, config.length_max_m, config.seed);
    const FeederTopology topology =
        build_feeder(config.nodes, lengths, config.r_ohm_per_km, config.x_ohm_per_km, base);
    const DayProfile day =
        config.profile_csv ? load_profile_csv(*config.profile_csv) : synthetic_default_profile();
    const TimeGrid grid(config.slots_per_hour);
    const double b_max = config.battery_size_pu();
    const ControlOptions opts = config.control_options();

    struct Cell {
        double s_max;
        double a;
        PlacementKind placement;
    };
    std::vector<Cell> cells;
    for (double s : config.s_max_grid) {
        for (double a : config.penetration_grid) {
            for (PlacementKind p : config.placements) cells.push_back({s, a, p});
        }
    }
    const int nc = static_cast<int>(config.controllers.size());
    std::vector<ScenarioResult> results(cells.size() * nc);

    std::mutex callback_mutex;
    std::atomic<size_t> next_cell{0};

    auto run_cell = [&](size_t ci) {
        const Cell& cell = cells[ci];
        ScenarioSpec spec;
        spec.s_max = cell.s_max;
        spec.a = cell.a;
        spec.placement = cell.placement;
        spec.seed = config.seed;

        auto emit = [&](int k, ScenarioResult row) {
            row.spec.controller = config.controllers[k];
            results[ci * nc + k] = row;
            if (on_row) {
                std::lock_guard<std::mutex> lock(callback_mutex);
                on_row(results[ci * nc + k]);
            }
        };

        try {
            const PvPlacement placement = place_pv(config.nodes, cell.a, cell.placement);
            const NodeProfiles profiles =
                build_node_profiles(day.demand, day.solar, config.demand_scale,
                                    config.solar_scale, base, placement, config.nodes,
                                    cell.s_max, grid, config.demand_pf);

            auto base_start = std::chrono::steady_clock::now();
            const OptimizationResult baseline =
                solve_controller(ControllerKind::NoControl, topology, profiles, b_max, opts);
            const double baseline_ms = elapsed_ms(base_start);
            const bool baseline_ok = baseline.status == QPStatus::Solved && baseline.loss > 0.0;

            for (int k = 0; k < nc; ++k) {
                const ControllerKind kind = config.controllers[k];
                ScenarioResult row;
                row.spec = spec;
                row.spec.controller = kind;

                OptimizationResult res;
                if (kind == ControllerKind::NoControl) {
                    res = baseline;
                    row.wall_ms = baseline_ms;
                } else {
                    auto start = std::chrono::steady_clock::now();
                    res = solve_controller(kind, topology, profiles, b_max, opts);
                    row.wall_ms = elapsed_ms(start);
                }

                row.status = res.status == QPStatus::Solved
                                 ? "solved"
                                 : (res.status == QPStatus::Infeasible ? "infeasible"
                                                                       : "max_iter");
                row.iterations = res.iterations;
                row.primal_residual = res.primal_residual;
                row.dual_residual = res.dual_residual;
                row.feasible = res.feasible;
                if (res.status == QPStatus::Solved) {
                    row.metrics.delta_v = voltage_variation(res.state);
                    row.metrics.loss = res.loss;
                    row.metrics.savings = baseline_ok
                                              ? energy_savings(baseline.loss, res.loss)
                                              : std::numeric_limits<double>::quiet_NaN();
                } else {
                    row.metrics.delta_v = std::numeric_limits<double>::quiet_NaN();
                    row.metrics.loss = std::numeric_limits<double>::quiet_NaN();
                    row.metrics.savings = std::numeric_limits<double>::quiet_NaN();
                }
                if (on_detail) {
                    std::lock_guard<std::mutex> lock(callback_mutex);
                    on_detail(row.spec, res);
                }
                emit(k, row);
            }
        } catch (const std::exception& e) {
            for (int k = 0; k < nc; ++k) {
                ScenarioResult row;
                row.spec = spec;
                row.status = std::string("error: ") + e.what();
                row.metrics.delta_v = std::numeric_limits<double>::quiet_NaN();
                row.metrics.loss = std::numeric_limits<double>::quiet_NaN();
                row.metrics.savings = std::numeric_limits<double>::quiet_NaN();
                emit(k, row);
            }
        }
    };

    int workers = config.workers > 0 ? config.workers
                                     : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min<int>(workers, static_cast<int>(cells.size())));

    if (workers == 1) {
        for (size_t ci = 0; ci < cells.size(); ++ci) run_cell(ci);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                while (true) {
                    const size_t ci = next_cell.fetch_add(1);
                    if (ci >= cells.size()) break;
                    run_cell(ci);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    return results;
}

std::vector<PlacementComparison> compare_placements(const std::vector<ScenarioResult>& results) {
    using Key = std::tuple<double, double, int>;
    std::map<Key, std::pair<const ScenarioResult*, const ScenarioResult*>> groups;
    for (const auto& row : results) {
        const Key key{row.spec.s_max, row.spec.a, static_cast<int>(row.spec.controller)};
        auto& slot = groups[key];
        if (row.spec.placement == PlacementKind::Front) {
            slot.first = &row;
        } else {
            slot.second = &row;
        }
    }

    std::vector<PlacementComparison> out;
    for (const auto& [key, pair] : groups) {
        if (pair.first == nullptr || pair.second == nullptr) {
            throw std::runtime_error("compare_placements: unmatched front/rear pair");
        }
        PlacementComparison cmp;
        cmp.s_max = std::get<0>(key);
        cmp.a = std::get<1>(key);
        cmp.controller = static_cast<ControllerKind>(std::get<2>(key));
        const bool front_ok = pair.first->status == "solved";
        const bool rear_ok = pair.second->status == "solved";
        cmp.skipped = (front_ok ? 0 : 1) + (rear_ok ? 0 : 1);
        if (front_ok && rear_ok) {
            cmp.delta_v_front_minus_rear =
                pair.first->metrics.delta_v - pair.second->metrics.delta_v;
            cmp.savings_rear_minus_front =
                pair.second->metrics.savings - pair.first->metrics.savings;
            cmp.rear_dominates = pair.second->metrics.delta_v <= pair.first->metrics.delta_v &&
                                 pair.second->metrics.savings >= pair.first->metrics.savings;
        } else {
            cmp.delta_v_front_minus_rear = std::numeric_limits<double>::quiet_NaN();
            cmp.savings_rear_minus_front = std::numeric_limits<double>::quiet_NaN();
            cmp.rear_dominates = false;
        }
        out.push_back(cmp);
    }
    return out;
}

std::string result_csv_row(const ScenarioResult& row) {
    std::ostringstream ss;
    ss.precision(10);
    ss << row.spec.s_max << ',' << row.spec.a << ',' << to_string(row.spec.placement) << ','
       << to_string(row.spec.controller) << ',' << row.metrics.delta_v << ','
       << row.metrics.loss << ',' << row.metrics.savings << ',' << row.status << ','
       << row.iterations << ',' << row.wall_ms;
    return ss.str();
}

void write_results_csv(const std::vector<ScenarioResult>& results, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write results CSV: " + path);
    out << "s_max,a,placement,controller,delta_v,loss_pu,savings,status,iters,wall_ms\n";
    for (const auto& row : results) out << result_csv_row(row) << '\n';
}

void write_comparison_csv(const std::vector<PlacementComparison>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write comparison CSV: " + path);
    out << "s_max,a,controller,delta_v_front_minus_rear,savings_rear_minus_front,"
           "rear_dominates,skipped\n";
    out.precision(10);
    for (const auto& c : rows) {
        out << c.s_max << ',' << c.a << ',' << to_string(c.controller) << ','
            << c.delta_v_front_minus_rear << ',' << c.savings_rear_minus_front << ','
            << (c.rear_dominates ? 1 : 0) << ',' << c.skipped << '\n';
    }
}

bool all_scenarios_accounted(const std::vector<ScenarioResult>& results) {
    for (const auto& row : results) {
        if (row.status != "solved" && row.status != "infeasible") return false;
    }
    return true;
}

}  // namespace feederopt
