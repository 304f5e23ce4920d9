#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "feederopt/controllers.hpp"
#include "feederopt/metrics.hpp"

namespace feederopt {

/// Everything needed to reproduce a sweep, loadable from a JSON config file.
struct SweepConfig {
    // feeder
    int nodes = 30;
    double length_min_m = 200.0;
    double length_max_m = 300.0;
    std::uint64_t seed = 42;
    double r_ohm_per_km = 0.33;
    double x_ohm_per_km = 0.38;
    double v_base_kv = 7.2;
    double s_base_kva = 1000.0;
    // profiles
    double demand_scale = 40e6;
    double solar_scale = 1e6;
    std::optional<double> demand_pf;
    int slots_per_hour = 3;
    double daily_kwh = 940.0 / 30.0;
    double b_max_fraction = 1.0 / 20.0;
    std::optional<double> b_max_pu;  // direct override of the battery size
    std::optional<std::string> profile_csv;
    // control
    double epsilon = 0.05;
    std::string beta_index = "colocated";  // or "shifted"
    bool terminal_soc_zero = false;
    double voltage_soft_weight = 0.0;
    double solver_eps = 1e-7;  // margin under the 1e-6 residual certificates
    int solver_max_iter = 50000;
    // sweep axes
    std::vector<double> s_max_grid{1.0, 1.1, 1.2, 1.3, 1.4, 1.5};
    std::vector<double> penetration_grid{0.2, 0.5, 0.8};
    std::vector<PlacementKind> placements{PlacementKind::Front, PlacementKind::Rear};
    std::vector<ControllerKind> controllers{ControllerKind::Global, ControllerKind::Local,
                                            ControllerKind::NoControl};
    int workers = 0;  // 0 = hardware concurrency

    static SweepConfig from_json_file(const std::string& path);
    static SweepConfig from_json_string(const std::string& text);
    std::string to_json_string() const;

    PerUnitBase base() const { return PerUnitBase::from_kv_kva(v_base_kv, s_base_kva); }
    ControlOptions control_options() const;
    double battery_size_pu() const;
};

struct ScenarioSpec {
    double s_max = 1.1;
    double a = 0.5;
    PlacementKind placement = PlacementKind::Rear;
    ControllerKind controller = ControllerKind::Global;
    std::uint64_t seed = 42;
};

struct ScenarioResult {
    ScenarioSpec spec;
    ScenarioMetrics metrics;
    std::string status;  // solved | infeasible | max_iter | error
    int iterations = 0;
    double wall_ms = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    bool feasible = false;
};

/// Evaluate the Cartesian product of the sweep axes. All scenarios share one
/// feeder realization (the config seed), so placement is the only
/// topological difference between cells. The baseline loss for the savings
/// metric is solved once per (s_max, a, placement) cell. Results are ordered
/// by spec; on_row, when given, fires as each scenario completes.
std::vector<ScenarioResult> run_sweep(
    const SweepConfig& config,
    const std::function<void(const ScenarioResult&)>& on_row = nullptr,
    const std::function<void(const ScenarioSpec&, const OptimizationResult&)>& on_detail = nullptr);

struct PlacementComparison {
    double s_max = 0.0;
    double a = 0.0;
    ControllerKind controller = ControllerKind::Global;
    double delta_v_front_minus_rear = 0.0;
    double savings_rear_minus_front = 0.0;
    bool rear_dominates = false;  // smaller variation and at least equal savings
    int skipped = 0;              // infeasible/failed rows excluded from the pair
};

/// Pair Front/Rear rows per (s_max, a, controller). Throws when a row is
/// missing its opposite placement.
std::vector<PlacementComparison> compare_placements(const std::vector<ScenarioResult>& results);

void write_results_csv(const std::vector<ScenarioResult>& results, const std::string& path);
std::string result_csv_row(const ScenarioResult& row);
void write_comparison_csv(const std::vector<PlacementComparison>& rows, const std::string& path);

/// True when every row either solved or was explicitly marked infeasible.
bool all_scenarios_accounted(const std::vector<ScenarioResult>& results);

}  // namespace feederopt
