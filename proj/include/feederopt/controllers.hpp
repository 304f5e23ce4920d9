#pragma once

#include <optional>
#include <string>
#include <vector>

#include "feederopt/distflow.hpp"
#include "feederopt/feeder.hpp"
#include "feederopt/profiles.hpp"
#include "feederopt/qp.hpp"

namespace feederopt {

/// Control regimes. Global decides battery rates and inverter VAR jointly;
/// Local pins VAR to the per-node control law and decides battery rates;
/// NoControl zeroes VAR and decides battery rates (the savings baseline);
/// Passive is a diagnostic regime with no decisions at all.
enum class ControllerKind { Global, Local, NoControl, Passive };

const char* to_string(ControllerKind kind);
ControllerKind controller_from_string(const std::string& name);

struct ControlOptions {
    double epsilon = 0.05;               // voltage band half-width
    BetaIndexing indexing = BetaIndexing::Colocated;
    bool terminal_soc_zero = false;      // require the battery to end empty
    double voltage_soft_weight = 0.0;    // >0 softens voltage bounds via slack penalty
    SolverSettings solver;
};

/// Column layout of the decision vector: battery rates first (node-major,
/// slot-minor), then inverter VAR when it is decided, then voltage slacks
/// in soft mode.
struct VariableMap {
    std::vector<int> battery_nodes;
    std::vector<int> q_nodes;  // empty when VAR is fixed by the regime
    int T = 0;
    int num_slack = 0;

    int beta_col(int battery_idx, int t) const { return battery_idx * T + t; }
    int q_col(int q_idx, int t) const {
        return static_cast<int>(battery_nodes.size()) * T + q_idx * T + t;
    }
    int num_vars() const {
        return static_cast<int>(battery_nodes.size() + q_nodes.size()) * T + num_slack;
    }
};

struct RowInfo {
    enum class Kind { Battery, TerminalSoc, QBound, Voltage, SlackSign };
    Kind kind = Kind::Battery;
    int node = 0;
    int slot = 0;  // 1-based for reporting
    std::string label() const;
};

/// Loss minimization over one day with the network recursions eliminated:
/// the objective is quadratic in the decisions and the constraints are the
/// cumulative battery bounds, the VAR box and the voltage band.
struct ControlProgram {
    QuadraticProgram qp;
    VariableMap vars;
    std::vector<RowInfo> rows;
    double constant = 0.0;  // loss of the zero-decision flows
    std::vector<std::vector<double>> q_fixed;  // regime-fixed VAR, [node][slot]
};

/// Assemble the full program with both battery rates and inverter VAR as
/// decisions (the Global regime).
ControlProgram build_global_program(const FeederTopology& topology, const NodeProfiles& profiles,
                                    double b_max, const ControlOptions& options);

/// Per-node, per-slot VAR rule: match the local reactive demand, saturating
/// at the capability bound.
double local_control_law(double q_c, double q_g_max);

struct OptimizationResult {
    ControllerKind kind = ControllerKind::Global;
    ControlSchedule schedule;
    NetworkState state;
    double loss = 0.0;
    bool feasible = false;
    QPStatus status = QPStatus::MaxIter;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double objective = 0.0;  // qp objective plus the constant term
    int iterations = 0;
    bool polished = false;
    std::string binding_constraint;  // set when infeasibility was certified
};

/// Solve one regime end to end: build the program, run the QP, rebuild the
/// schedule and re-evaluate it through the linear flow.
OptimizationResult solve_controller(ControllerKind kind, const FeederTopology& topology,
                                    const NodeProfiles& profiles, double b_max,
                                    const ControlOptions& options);

/// One-line solver report: `controller,status,iterations,primal_res,dual_res`.
std::string solver_report_line(const OptimizationResult& result);

}  // namespace feederopt
