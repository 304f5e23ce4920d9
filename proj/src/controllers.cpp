#include "feederopt/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace feederopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTikhonov = 1e-9;   // uniqueness regularization on the diagonal
constexpr double kFeasTol = 1e-6;    // re-evaluation tolerance for feasibility

/// Prefix index bounding a battery variable's influence: the rate at node k
/// enters the flow on segments i < effective_node(k). Under the shifted
/// convention the rate of node n drops out of every segment update.
int effective_node(int node, int n, BetaIndexing indexing) {
    if (indexing == BetaIndexing::Colocated) return node;
    return node <= n - 1 ? node + 1 : 0;
}

ControlProgram build_program(const FeederTopology& topology, const NodeProfiles& profiles,
                             double b_max, const ControlOptions& options, bool decide_q,
                             const std::vector<std::vector<double>>& q_fixed) {
    const int n = topology.n;
    const int T = profiles.grid.T;
    const double dt = profiles.grid.dt_hours;
    const bool soft = options.voltage_soft_weight > 0.0;

    ControlProgram prog;
    prog.q_fixed = q_fixed;
    prog.vars.T = T;
    prog.vars.battery_nodes = profiles.pv_nodes;
    if (decide_q) prog.vars.q_nodes = profiles.pv_nodes;
    if (soft) prog.vars.num_slack = n * T;

    const int mb = static_cast<int>(prog.vars.battery_nodes.size());
    const int mq = static_cast<int>(prog.vars.q_nodes.size());
    const int slack_base = (mb + mq) * T;
    auto slack_col = [&](int j, int t) { return slack_base + (j - 1) * T + t; };

    // Flows with all decisions at zero (VAR pinned to its fixed part).
    ControlSchedule zero = ControlSchedule::zeros(n, T);
    zero.q_g = q_fixed;
    const NetworkState state0 = linear_flow(topology, profiles, zero, options.indexing);
    prog.constant = total_loss(state0, topology, LossModel::Linear);

    // Common-path resistance/reactance prefixes R[j] = sum of segments < j.
    std::vector<double> R(n + 1, 0.0), X(n + 1, 0.0);
    for (int j = 0; j < n; ++j) {
        R[j + 1] = R[j] + topology.segments[j].r_pu;
        X[j + 1] = X[j] + topology.segments[j].x_pu;
    }
    // Loss-gradient prefixes of the zero-decision flows.
    std::vector<std::vector<double>> SP(n + 1, std::vector<double>(T, 0.0));
    std::vector<std::vector<double>> SQ(n + 1, std::vector<double>(T, 0.0));
    for (int t = 0; t < T; ++t) {
        for (int j = 0; j < n; ++j) {
            SP[j + 1][t] = SP[j][t] + topology.segments[j].r_pu * state0.P[j][t];
            SQ[j + 1][t] = SQ[j][t] + topology.segments[j].r_pu * state0.Q[j][t];
        }
    }

    QuadraticProgram& qp = prog.qp;
    qp.num_vars = prog.vars.num_vars();
    qp.f.assign(qp.num_vars, 0.0);

    // Quadratic objective: a pair of decisions sharing a slot couples through
    // the resistance of their common path to the substation.
    for (int t = 0; t < T; ++t) {
        for (int a = 0; a < mb; ++a) {
            const int ea = effective_node(prog.vars.battery_nodes[a], n, options.indexing);
            for (int b = a; b < mb; ++b) {
                const int eb = effective_node(prog.vars.battery_nodes[b], n, options.indexing);
                const double v = 2.0 * R[std::min(ea, eb)];
                if (v != 0.0) {
                    qp.H.push_back({prog.vars.beta_col(a, t), prog.vars.beta_col(b, t), v});
                }
            }
            qp.f[prog.vars.beta_col(a, t)] = 2.0 * SP[ea][t];
        }
        for (int a = 0; a < mq; ++a) {
            const int ka = prog.vars.q_nodes[a];
            for (int b = a; b < mq; ++b) {
                const int kb = prog.vars.q_nodes[b];
                const double v = 2.0 * R[std::min(ka, kb)];
                if (v != 0.0) {
                    qp.H.push_back({prog.vars.q_col(a, t), prog.vars.q_col(b, t), v});
                }
            }
            qp.f[prog.vars.q_col(a, t)] = -2.0 * SQ[ka][t];
        }
    }
    for (int c = 0; c < (mb + mq) * T; ++c) qp.H.push_back({c, c, kTikhonov});
    if (soft) {
        for (int s = 0; s < prog.vars.num_slack; ++s) {
            qp.H.push_back({slack_base + s, slack_base + s, 2.0 * options.voltage_soft_weight});
        }
    }

    // Battery energy bounds: cumulative sums of the rates, one row per slot
    // so the stored energy stays in [0, B] at every grid point including the
    // end of the day.
    int row = 0;
    for (int a = 0; a < mb; ++a) {
        for (int t = 0; t < T; ++t) {
            for (int tau = 0; tau <= t; ++tau) {
                qp.A.push_back({row, prog.vars.beta_col(a, tau), dt});
            }
            qp.l.push_back(0.0);
            qp.u.push_back(b_max);
            prog.rows.push_back({RowInfo::Kind::Battery, prog.vars.battery_nodes[a], t + 1});
            ++row;
        }
        if (options.terminal_soc_zero) {
            for (int tau = 0; tau < T; ++tau) {
                qp.A.push_back({row, prog.vars.beta_col(a, tau), dt});
            }
            qp.l.push_back(0.0);
            qp.u.push_back(0.0);
            prog.rows.push_back({RowInfo::Kind::TerminalSoc, prog.vars.battery_nodes[a], T});
            ++row;
        }
    }

    // VAR capability box.
    for (int a = 0; a < mq; ++a) {
        const int k = prog.vars.q_nodes[a];
        for (int t = 0; t < T; ++t) {
            qp.A.push_back({row, prog.vars.q_col(a, t), 1.0});
            qp.l.push_back(-profiles.q_g_max[k][t]);
            qp.u.push_back(profiles.q_g_max[k][t]);
            prog.rows.push_back({RowInfo::Kind::QBound, k, t + 1});
            ++row;
        }
    }

    // Voltage band at every node and slot.
    for (int j = 1; j <= n; ++j) {
        for (int t = 0; t < T; ++t) {
            const double v0 = state0.V[j][t];
            auto push_coeffs = [&](int r) {
                for (int a = 0; a < mb; ++a) {
                    const int ea = effective_node(prog.vars.battery_nodes[a], n, options.indexing);
                    const double c = -R[std::min(j, ea)];
                    if (c != 0.0) qp.A.push_back({r, prog.vars.beta_col(a, t), c});
                }
                for (int a = 0; a < mq; ++a) {
                    const double c = X[std::min(j, prog.vars.q_nodes[a])];
                    if (c != 0.0) qp.A.push_back({r, prog.vars.q_col(a, t), c});
                }
            };
            if (!soft) {
                push_coeffs(row);
                qp.l.push_back(1.0 - options.epsilon - v0);
                qp.u.push_back(1.0 + options.epsilon - v0);
                prog.rows.push_back({RowInfo::Kind::Voltage, j, t + 1});
                ++row;
            } else {
                push_coeffs(row);
                qp.A.push_back({row, slack_col(j, t), 1.0});
                qp.l.push_back(1.0 - options.epsilon - v0);
                qp.u.push_back(kInf);
                prog.rows.push_back({RowInfo::Kind::Voltage, j, t + 1});
                ++row;
                push_coeffs(row);
                qp.A.push_back({row, slack_col(j, t), -1.0});
                qp.l.push_back(-kInf);
                qp.u.push_back(1.0 + options.epsilon - v0);
                prog.rows.push_back({RowInfo::Kind::Voltage, j, t + 1});
                ++row;
                qp.A.push_back({row, slack_col(j, t), 1.0});
                qp.l.push_back(0.0);
                qp.u.push_back(kInf);
                prog.rows.push_back({RowInfo::Kind::SlackSign, j, t + 1});
                ++row;
            }
        }
    }
    qp.num_constraints = row;
    return prog;
}

std::vector<std::vector<double>> fixed_q_for(ControllerKind kind, const NodeProfiles& profiles) {
    const int n = profiles.n;
    const int T = profiles.grid.T;
    std::vector<std::vector<double>> q(n + 1, std::vector<double>(T, 0.0));
    if (kind == ControllerKind::Local) {
        for (int k : profiles.pv_nodes) {
            for (int t = 0; t < T; ++t) {
                q[k][t] = local_control_law(profiles.q_c[k][t], profiles.q_g_max[k][t]);
            }
        }
    }
    return q;
}

}  // namespace

const char* to_string(ControllerKind kind) {
    switch (kind) {
        case ControllerKind::Global: return "global";
        case ControllerKind::Local: return "local";
        case ControllerKind::NoControl: return "nocontrol";
        case ControllerKind::Passive: return "passive";
    }
    return "unknown";
}

ControllerKind controller_from_string(const std::string& name) {
    if (name == "global") return ControllerKind::Global;
    if (name == "local") return ControllerKind::Local;
    if (name == "nocontrol") return ControllerKind::NoControl;
    if (name == "passive") return ControllerKind::Passive;
    throw std::invalid_argument("unknown controller: " + name);
}

std::string RowInfo::label() const {
    std::ostringstream ss;
    switch (kind) {
        case Kind::Battery: ss << "battery bound node " << node << " after slot " << slot; break;
        case Kind::TerminalSoc: ss << "terminal soc node " << node; break;
        case Kind::QBound: ss << "var bound node " << node << " slot " << slot; break;
        case Kind::Voltage: ss << "voltage node " << node << " slot " << slot; break;
        case Kind::SlackSign: ss << "slack sign node " << node << " slot " << slot; break;
    }
    return ss.str();
}

ControlProgram build_global_program(const FeederTopology& topology, const NodeProfiles& profiles,
                                    double b_max, const ControlOptions& options) {
    const auto q_fixed = fixed_q_for(ControllerKind::Global, profiles);
    return build_program(topology, profiles, b_max, options, /*decide_q=*/true, q_fixed);
}

double local_control_law(double q_c, double q_g_max) {
    if (q_g_max < 0.0) throw std::invalid_argument("local_control_law: negative capability");
    if (std::abs(q_c) <= q_g_max) return q_c;
    return (q_c > 0.0 ? 1.0 : -1.0) * q_g_max;
}

OptimizationResult solve_controller(ControllerKind kind, const FeederTopology& topology,
                                    const NodeProfiles& profiles, double b_max,
                                    const ControlOptions& options) {
    const int n = topology.n;
    const int T = profiles.grid.T;

    OptimizationResult result;
    result.kind = kind;

    if (kind == ControllerKind::Passive) {
        result.schedule = ControlSchedule::zeros(n, T);
        result.state = linear_flow(topology, profiles, result.schedule, options.indexing);
        result.loss = total_loss(result.state, topology, LossModel::Linear);
        result.objective = result.loss;
        result.status = QPStatus::Solved;
    } else {
        const auto q_fixed = fixed_q_for(kind, profiles);
        const bool decide_q = kind == ControllerKind::Global;
        ControlProgram prog =
            build_program(topology, profiles, b_max, options, decide_q, q_fixed);

        QPSolution qsol = solve_qp(prog.qp, options.solver);
        result.status = qsol.status;
        result.primal_residual = qsol.primal_residual;
        result.dual_residual = qsol.dual_residual;
        result.iterations = qsol.iterations;
        result.polished = qsol.polished;
        result.objective = qsol.objective + prog.constant;

        result.schedule = ControlSchedule::zeros(n, T);
        result.schedule.q_g = prog.q_fixed;
        const int mb = static_cast<int>(prog.vars.battery_nodes.size());
        for (int a = 0; a < mb; ++a) {
            for (int t = 0; t < T; ++t) {
                result.schedule.beta[prog.vars.battery_nodes[a]][t] =
                    qsol.x[prog.vars.beta_col(a, t)];
            }
        }
        for (int a = 0; a < static_cast<int>(prog.vars.q_nodes.size()); ++a) {
            for (int t = 0; t < T; ++t) {
                result.schedule.q_g[prog.vars.q_nodes[a]][t] = qsol.x[prog.vars.q_col(a, t)];
            }
        }

        result.state = linear_flow(topology, profiles, result.schedule, options.indexing);
        result.loss = total_loss(result.state, topology, LossModel::Linear);

        if (qsol.status == QPStatus::Infeasible && !qsol.infeasibility_certificate.empty()) {
            int worst = 0;
            for (int i = 1; i < static_cast<int>(qsol.infeasibility_certificate.size()); ++i) {
                if (std::abs(qsol.infeasibility_certificate[i]) >
                    std::abs(qsol.infeasibility_certificate[worst])) {
                    worst = i;
                }
            }
            if (worst < static_cast<int>(prog.rows.size())) {
                result.binding_constraint = prog.rows[worst].label();
            }
        }
    }

    // Re-evaluate the schedule against the original constraints.
    bool ok = result.status == QPStatus::Solved;
    for (int k : profiles.pv_nodes) {
        const BatteryTrajectory traj =
            battery_trajectory(result.schedule.beta[k], b_max, profiles.grid.dt_hours);
        for (double b : traj.b) {
            if (b < -kFeasTol || b > b_max + kFeasTol) ok = false;
        }
        for (int t = 0; t < T; ++t) {
            if (std::abs(result.schedule.q_g[k][t]) > profiles.q_g_max[k][t] + kFeasTol) ok = false;
        }
    }
    if (options.voltage_soft_weight <= 0.0) {
        for (int j = 0; j <= n; ++j) {
            for (int t = 0; t < T; ++t) {
                const double v = result.state.V[j][t];
                if (v < 1.0 - options.epsilon - kFeasTol || v > 1.0 + options.epsilon + kFeasTol) {
                    ok = false;
                }
            }
        }
    }
    result.feasible = ok;
    return result;
}

std::string solver_report_line(const OptimizationResult& result) {
    const char* status = result.status == QPStatus::Solved
                             ? "solved"
                             : (result.status == QPStatus::Infeasible ? "infeasible" : "max_iter");
    std::ostringstream ss;
    ss.precision(6);
    ss << std::scientific;
    ss << to_string(result.kind) << ',' << status << ',' << result.iterations << ','
       << result.primal_residual << ',' << result.dual_residual;
    return ss.str();
}

}  // namespace feederopt
