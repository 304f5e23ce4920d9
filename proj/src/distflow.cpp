#include "feederopt/distflow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace feederopt {

namespace {

double beta_for_update(const ControlSchedule& controls, BetaIndexing indexing, int j, int t) {
    // Update from node j to j+1: Colocated reads beta[j+1], Shifted beta[j].
    return indexing == BetaIndexing::Colocated ? controls.beta[j + 1][t] : controls.beta[j][t];
}

void fill_battery_trajectories(NetworkState& state, const ControlSchedule& controls,
                               double dt_hours) {
    const int n = state.n;
    const int T = state.T;
    state.b.assign(n + 1, std::vector<double>(T + 1, 0.0));
    for (int j = 0; j <= n; ++j) {
        for (int t = 0; t < T; ++t) {
            state.b[j][t + 1] = state.b[j][t] + controls.beta[j][t] * dt_hours;
        }
    }
}

}  // namespace

ControlSchedule ControlSchedule::zeros(int n, int T) {
    ControlSchedule s;
    s.beta.assign(n + 1, std::vector<double>(T, 0.0));
    s.q_g.assign(n + 1, std::vector<double>(T, 0.0));
    return s;
}

NetworkState linear_flow(const FeederTopology& topology, const NodeProfiles& profiles,
                         const ControlSchedule& controls, BetaIndexing indexing) {
    const int n = topology.n;
    const int T = profiles.grid.T;

    NetworkState state;
    state.n = n;
    state.T = T;
    state.P.assign(n + 1, std::vector<double>(T, 0.0));
    state.Q.assign(n + 1, std::vector<double>(T, 0.0));
    state.V.assign(n + 1, std::vector<double>(T, 1.0));

    for (int t = 0; t < T; ++t) {
        // Backward accumulation from the open rear end, loss terms dropped.
        for (int j = n - 1; j >= 0; --j) {
            const double net_p = profiles.p_c[j + 1][t] - profiles.p_g[j + 1][t] +
                                 beta_for_update(controls, indexing, j, t);
            const double net_q = profiles.q_c[j + 1][t] - controls.q_g[j + 1][t];
            state.P[j][t] = state.P[j + 1][t] + net_p;
            state.Q[j][t] = state.Q[j + 1][t] + net_q;
        }
        // Forward voltage drop referred to the substation voltage.
        const double v0 = state.V[0][t];
        for (int j = 0; j < n; ++j) {
            state.V[j + 1][t] = state.V[j][t] - (topology.segments[j].r_pu * state.P[j][t] +
                                                 topology.segments[j].x_pu * state.Q[j][t]) /
                                                    v0;
        }
    }
    fill_battery_trajectories(state, controls, profiles.grid.dt_hours);
    return state;
}

NetworkState nonlinear_sweep(const FeederTopology& topology, const NodeProfiles& profiles,
                             const ControlSchedule& controls, const SweepOptions& options) {
    if (!(options.tol > 0.0)) throw std::invalid_argument("nonlinear_sweep: tol must be positive");
    const int n = topology.n;
    const int T = profiles.grid.T;

    NetworkState state;
    state.n = n;
    state.T = T;
    state.P.assign(n + 1, std::vector<double>(T, 0.0));
    state.Q.assign(n + 1, std::vector<double>(T, 0.0));
    state.V.assign(n + 1, std::vector<double>(T, 1.0));

    std::vector<double> P(n + 1, 0.0), Q(n + 1, 0.0), V(n + 1, 1.0);
    std::vector<double> P_prev(n + 1), Q_prev(n + 1), V_prev(n + 1);
    int worst_iterations = 0;

    for (int t = 0; t < T; ++t) {
        std::fill(P.begin(), P.end(), 0.0);
        std::fill(Q.begin(), Q.end(), 0.0);
        std::fill(V.begin(), V.end(), 1.0);  // flat start

        int iter = 0;
        double residual = 0.0;
        bool converged = false;
        while (iter < options.max_iter) {
            ++iter;
            V_prev = V;
            P_prev = P;
            Q_prev = Q;
            // Backward sweep; the quadratic loss term on segment j uses the
            // previous iterate's flow and voltage at the sending node j.
            for (int j = n - 1; j >= 0; --j) {
                const double loss = (P[j] * P[j] + Q[j] * Q[j]) / (V[j] * V[j]);
                const double net_p = profiles.p_c[j + 1][t] - profiles.p_g[j + 1][t] +
                                     beta_for_update(controls, options.indexing, j, t);
                const double net_q = profiles.q_c[j + 1][t] - controls.q_g[j + 1][t];
                P[j] = P[j + 1] + net_p + topology.segments[j].r_pu * loss;
                Q[j] = Q[j + 1] + net_q + topology.segments[j].x_pu * loss;
            }
            // Forward sweep with the exact voltage recursion.
            for (int j = 0; j < n; ++j) {
                const double r = topology.segments[j].r_pu;
                const double x = topology.segments[j].x_pu;
                const double flow2 = (P[j] * P[j] + Q[j] * Q[j]) / (V[j] * V[j]);
                const double v2 = V[j] * V[j] - 2.0 * (r * P[j] + x * Q[j]) + (r * r + x * x) * flow2;
                if (!(v2 > 0.0) || !std::isfinite(v2)) {
                    throw DivergenceError(std::isfinite(v2) ? 1.0 - v2 : v2, iter);
                }
                V[j + 1] = std::sqrt(v2);
            }
            // Voltage change drives the stated tolerance; flow changes are
            // folded in so a coincidentally stationary voltage cannot mask a
            // still-moving power iterate.
            residual = 0.0;
            for (int j = 0; j <= n; ++j) {
                residual = std::max(residual, std::abs(V[j] - V_prev[j]));
                residual = std::max(residual, std::abs(P[j] - P_prev[j]));
                residual = std::max(residual, std::abs(Q[j] - Q_prev[j]));
            }
            if (residual < options.tol) {
                converged = true;
                break;
            }
        }
        if (!converged) throw DivergenceError(residual, iter);
        worst_iterations = std::max(worst_iterations, iter);

        for (int j = 0; j <= n; ++j) {
            state.P[j][t] = P[j];
            state.Q[j][t] = Q[j];
            state.V[j][t] = V[j];
        }
    }
    state.sweep_iterations = worst_iterations;
    fill_battery_trajectories(state, controls, profiles.grid.dt_hours);
    return state;
}

double sweep_residual(const NetworkState& state, const FeederTopology& topology,
                      const NodeProfiles& profiles, const ControlSchedule& controls,
                      BetaIndexing indexing) {
    double worst = 0.0;
    for (int t = 0; t < state.T; ++t) {
        for (int j = 0; j < state.n; ++j) {
            const double r = topology.segments[j].r_pu;
            const double x = topology.segments[j].x_pu;
            const double P = state.P[j][t];
            const double Q = state.Q[j][t];
            const double V2 = state.V[j][t] * state.V[j][t];
            const double loss = (P * P + Q * Q) / V2;
            const double net_p = profiles.p_c[j + 1][t] - profiles.p_g[j + 1][t] +
                                 beta_for_update(controls, indexing, j, t);
            const double net_q = profiles.q_c[j + 1][t] - controls.q_g[j + 1][t];
            worst = std::max(worst, std::abs(state.P[j + 1][t] - (P - r * loss - net_p)));
            worst = std::max(worst, std::abs(state.Q[j + 1][t] - (Q - x * loss - net_q)));
            const double v2_next = V2 - 2.0 * (r * P + x * Q) + (r * r + x * x) * loss;
            worst = std::max(worst,
                             std::abs(state.V[j + 1][t] * state.V[j + 1][t] - v2_next));
        }
    }
    return worst;
}

double total_loss(const NetworkState& state, const FeederTopology& topology, LossModel model) {
    double loss = 0.0;
    for (int t = 0; t < state.T; ++t) {
        for (int j = 0; j < state.n; ++j) {
            const double denom = (model == LossModel::Linear) ? state.V[0][t] : state.V[j][t];
            loss += topology.segments[j].r_pu *
                    (state.P[j][t] * state.P[j][t] + state.Q[j][t] * state.Q[j][t]) /
                    (denom * denom);
        }
    }
    return loss;
}

BatteryTrajectory battery_trajectory(const std::vector<double>& beta, double b_max,
                                     double dt_hours) {
    const int T = static_cast<int>(beta.size());
    BatteryTrajectory traj;
    traj.b.assign(T + 1, 0.0);
    for (int t = 0; t < T; ++t) traj.b[t + 1] = traj.b[t] + beta[t] * dt_hours;
    for (int t = 0; t <= T; ++t) {
        if (traj.b[t] < 0.0 || traj.b[t] > b_max) {
            traj.violates_bounds = true;
            traj.first_violation_slot = t + 1;
            break;
        }
    }
    return traj;
}

void write_state_csv(const NetworkState& state, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write state CSV: " + path);
    out << "node,slot,P_pu,Q_pu,V_pu,b_pu\n";
    out.precision(12);
    for (int j = 0; j <= state.n; ++j) {
        for (int t = 0; t < state.T; ++t) {
            out << j << ',' << (t + 1) << ',' << state.P[j][t] << ',' << state.Q[j][t] << ','
                << state.V[j][t] << ',' << state.b[j][t] << '\n';
        }
    }
}

void write_schedule_csv(const ControlSchedule& schedule, int n, int T, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write schedule CSV: " + path);
    out << "node,slot,beta_pu,qg_pu\n";
    out.precision(12);
    for (int j = 0; j <= n; ++j) {
        for (int t = 0; t < T; ++t) {
            out << j << ',' << (t + 1) << ',' << schedule.beta[j][t] << ',' << schedule.q_g[j][t]
                << '\n';
        }
    }
}

}  // namespace feederopt
