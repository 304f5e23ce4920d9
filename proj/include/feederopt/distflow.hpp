#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "feederopt/feeder.hpp"
#include "feederopt/profiles.hpp"

namespace feederopt {

/// Battery indexing convention for the segment update from node j to j+1.
///   Colocated: the update carries beta of node j+1, so battery power sits
///              with its node's consumption terms (default).
///   Shifted:   the update carries beta of node j, one node upstream; the
///              two conventions differ by a one-node shift.
enum class BetaIndexing { Colocated, Shifted };

/// Decision variables per node and slot: battery charge rate beta (positive
/// while charging, which draws power from the feeder) and inverter VAR q_g.
/// Indexed [node][slot], node 0..n; zero at nodes without equipment.
struct ControlSchedule {
    std::vector<std::vector<double>> beta;
    std::vector<std::vector<double>> q_g;

    static ControlSchedule zeros(int n, int T);
};

/// Power flows, voltages and stored energy resulting from a schedule.
/// P[j][t], Q[j][t] are the flows on the segment leaving node j (P[n] = 0);
/// V[j][t] is the voltage at node j (V[0] = 1); b[j] holds the stored-energy
/// trajectory with T+1 points, b[j][0] = 0.
struct NetworkState {
    int n = 0;
    int T = 0;
    std::vector<std::vector<double>> P;
    std::vector<std::vector<double>> Q;
    std::vector<std::vector<double>> V;
    std::vector<std::vector<double>> b;
    int sweep_iterations = 0;  // nonzero only for the nonlinear solver
};

/// Stored-energy series for one battery. Bound violations are reported,
/// never clamped.
struct BatteryTrajectory {
    std::vector<double> b;  // T+1 values, b[0] = 0
    bool violates_bounds = false;
    int first_violation_slot = 0;  // 1-based slot of the first violating b(t)
};

/// Thrown when the backward/forward sweep fails to reach its tolerance.
struct DivergenceError : std::runtime_error {
    double residual;
    int iterations;
    DivergenceError(double residual_, int iterations_)
        : std::runtime_error("nonlinear sweep did not converge: residual " +
                             std::to_string(residual_) + " after " +
                             std::to_string(iterations_) + " iterations"),
          residual(residual_),
          iterations(iterations_) {}
};

/// Linearized branch flow: losses dropped from the power recursions and the
/// voltage recursion referred to the substation voltage. Always evaluates.
NetworkState linear_flow(const FeederTopology& topology, const NodeProfiles& profiles,
                         const ControlSchedule& controls,
                         BetaIndexing indexing = BetaIndexing::Colocated);

struct SweepOptions {
    double tol = 1e-10;
    int max_iter = 100;
    BetaIndexing indexing = BetaIndexing::Colocated;
};

/// Full branch flow with quadratic loss terms, solved per slot by a
/// backward/forward sweep from a flat voltage start.
NetworkState nonlinear_sweep(const FeederTopology& topology, const NodeProfiles& profiles,
                             const ControlSchedule& controls, const SweepOptions& options = {});

/// Max-norm defect of a state substituted back into the full branch-flow
/// recursions. Converged sweeps keep this within an order of the tolerance.
double sweep_residual(const NetworkState& state, const FeederTopology& topology,
                      const NodeProfiles& profiles, const ControlSchedule& controls,
                      BetaIndexing indexing = BetaIndexing::Colocated);

enum class LossModel { Linear, Nonlinear };

/// Sum of r_j * (P_j^2 + Q_j^2) / V^2 over segments and slots; the linear
/// model divides by the substation voltage, the nonlinear one by V_j(t).
double total_loss(const NetworkState& state, const FeederTopology& topology, LossModel model);

/// Integrate one battery: b(1) = 0, b(t+1) = b(t) + beta(t)*dt.
BatteryTrajectory battery_trajectory(const std::vector<double>& beta, double b_max,
                                     double dt_hours);

/// CSV dump, header `node,slot,P_pu,Q_pu,V_pu,b_pu`, slots 1-based.
void write_state_csv(const NetworkState& state, const std::string& path);
void write_schedule_csv(const ControlSchedule& schedule, int n, int T, const std::string& path);

}  // namespace feederopt
