#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "feederopt/experiments.hpp"

namespace fs = std::filesystem;
using namespace feederopt;

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& item : split_csv(s)) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw CLI::ValidationError(what, "cannot parse '" + item + "' as a number");
        }
    }
    if (out.empty()) throw CLI::ValidationError(what, "empty list");
    return out;
}

std::string scenario_dir_name(const ScenarioSpec& spec) {
    std::ostringstream ss;
    ss << "s" << spec.s_max << "_a" << spec.a << '_' << to_string(spec.placement) << '_'
       << to_string(spec.controller);
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Radial-feeder battery placement and volt-VAR control study"};
    app.require_subcommand(1);

    auto* sweep = app.add_subcommand("sweep", "Run the scenario sweep and write result tables");
    std::string config_path, out_dir = "out";
    std::string smax_arg, penetration_arg, placement_arg, controller_arg;
    std::uint64_t seed_arg = 0;
    bool seed_set = false, detail = false, dump_config = false;
    int workers_arg = -1;

    sweep->add_option("--config", config_path, "JSON config file");
    sweep->add_option("--out", out_dir, "output directory")->capture_default_str();
    sweep->add_option("--smax", smax_arg, "comma list of s_max values");
    sweep->add_option("--penetration", penetration_arg, "comma list of penetration fractions");
    sweep->add_option("--placement", placement_arg, "comma list from {front,rear}");
    sweep->add_option("--controller", controller_arg,
                      "comma list from {global,local,nocontrol,passive}");
    sweep->add_option("--seed", seed_arg, "feeder realization seed")
        ->each([&](const std::string&) { seed_set = true; });
    sweep->add_option("--workers", workers_arg, "worker thread count (0 = hardware)");
    sweep->add_flag("--detail", detail, "write per-scenario state/schedule/report CSVs");
    sweep->add_flag("--dump-config", dump_config, "print the effective config and exit");

    CLI11_PARSE(app, argc, argv);

    try {
        SweepConfig config = config_path.empty() ? SweepConfig{}
                                                 : SweepConfig::from_json_file(config_path);
        if (!smax_arg.empty()) config.s_max_grid = parse_double_list(smax_arg, "--smax");
        if (!penetration_arg.empty()) {
            config.penetration_grid = parse_double_list(penetration_arg, "--penetration");
        }
        if (!placement_arg.empty()) {
            config.placements.clear();
            for (const auto& p : split_csv(placement_arg)) {
                if (p == "front") {
                    config.placements.push_back(PlacementKind::Front);
                } else if (p == "rear") {
                    config.placements.push_back(PlacementKind::Rear);
                } else {
                    throw std::invalid_argument("unknown placement: " + p);
                }
            }
        }
        if (!controller_arg.empty()) {
            config.controllers.clear();
            for (const auto& c : split_csv(controller_arg)) {
                config.controllers.push_back(controller_from_string(c));
            }
        }
        if (seed_set) config.seed = seed_arg;
        if (workers_arg >= 0) config.workers = workers_arg;

        if (dump_config) {
            std::cout << config.to_json_string() << std::endl;
            return 0;
        }

        fs::create_directories(out_dir);
        const fs::path results_path = fs::path(out_dir) / "results.csv";

        // Stream rows as they complete so a crash loses at most one row;
        // the file is rewritten in spec order once the sweep finishes.
        std::ofstream stream_out(results_path);
        stream_out << "s_max,a,placement,controller,delta_v,loss_pu,savings,status,iters,wall_ms\n";
        auto on_row = [&](const ScenarioResult& row) {
            stream_out << result_csv_row(row) << '\n';
            stream_out.flush();
            std::cout << "  " << result_csv_row(row) << '\n';
        };

        std::function<void(const ScenarioSpec&, const OptimizationResult&)> on_detail;
        if (detail) {
            on_detail = [&](const ScenarioSpec& spec, const OptimizationResult& res) {
                const fs::path dir = fs::path(out_dir) / "detail" / scenario_dir_name(spec);
                fs::create_directories(dir);
                write_state_csv(res.state, (dir / "state.csv").string());
                write_schedule_csv(res.schedule, res.state.n, res.state.T,
                                   (dir / "schedule.csv").string());
                std::ofstream rep(dir / "solver_report.csv");
                rep << "controller,status,iterations,primal_res,dual_res\n";
                rep << solver_report_line(res) << '\n';
            };
        }

        std::cout << "sweep: " << config.s_max_grid.size() << " s_max x "
                  << config.penetration_grid.size() << " penetrations x "
                  << config.placements.size() << " placements x " << config.controllers.size()
                  << " controllers\n";
        const auto results = run_sweep(config, on_row, on_detail);
        stream_out.close();

        write_results_csv(results, results_path.string());
        std::cout << "wrote " << results.size() << " rows to " << results_path << '\n';

        const bool has_front = std::find(config.placements.begin(), config.placements.end(),
                                         PlacementKind::Front) != config.placements.end();
        const bool has_rear = std::find(config.placements.begin(), config.placements.end(),
                                        PlacementKind::Rear) != config.placements.end();
        if (has_front && has_rear) {
            const auto comparison = compare_placements(results);
            write_comparison_csv(comparison,
                                 (fs::path(out_dir) / "placement_comparison.csv").string());
            int dominated = 0;
            for (const auto& c : comparison) dominated += c.rear_dominates ? 1 : 0;
            std::cout << "rear placement dominates in " << dominated << "/" << comparison.size()
                      << " comparisons\n";
        }

        if (!all_scenarios_accounted(results)) {
            std::cerr << "some scenarios neither solved nor were marked infeasible\n";
            return 1;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
