// Test-side oracles, independent of the solver and program-assembly paths
// they are used to check. The lattice searches enumerate candidate points
// and score them through the public simulator; the fixed-point oracle
// iterates the scalar branch-flow balance directly.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "feederopt/distflow.hpp"
#include "feederopt/feeder.hpp"
#include "feederopt/profiles.hpp"

namespace oracles {

/// Portable uniform doubles from a raw 64-bit stream (same construction the
/// library uses for length sampling, but a distinct stream/purpose).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next_u64() {
        // xorshift64*
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545f4914f6cdd1dull;
    }
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }
    int uniform_int(int lo, int hi) {  // inclusive
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

  private:
    std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Box-constrained QP lattice search (plain exhaustive enumeration).
// ---------------------------------------------------------------------------

struct BoxQpOracleResult {
    double objective = std::numeric_limits<double>::infinity();
    std::vector<double> x;
};

/// Minimize 1/2 x'Hx + f'x over the box [lo, hi] on a grid of `points`
/// samples per dimension (endpoints included). H is dense row-major.
inline BoxQpOracleResult lattice_min_box_qp(const std::vector<double>& H_dense,
                                            const std::vector<double>& f,
                                            const std::vector<double>& lo,
                                            const std::vector<double>& hi, int points) {
    const int d = static_cast<int>(f.size());
    std::vector<int> idx(d, 0);
    std::vector<double> x(d);
    BoxQpOracleResult best;
    auto value_at = [&]() {
        for (int i = 0; i < d; ++i) {
            const double step = (hi[i] - lo[i]) / (points - 1);
            x[i] = lo[i] + idx[i] * step;
        }
        double obj = 0.0;
        for (int i = 0; i < d; ++i) {
            obj += f[i] * x[i];
            for (int j = 0; j < d; ++j) obj += 0.5 * x[i] * H_dense[i * d + j] * x[j];
        }
        return obj;
    };
    while (true) {
        const double obj = value_at();
        if (obj < best.objective) {
            best.objective = obj;
            best.x = x;
        }
        int k = d - 1;
        while (k >= 0 && ++idx[k] == points) {
            idx[k] = 0;
            --k;
        }
        if (k < 0) break;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Control-instance lattice search.
//
// Scores candidate schedules through linear_flow/total_loss only. The loss
// is an exact quadratic in the decisions and every constraint is affine, so
// the oracle first recovers those polynomials by finite differencing the
// simulator (exact for quadratics), then enumerates the lattice. The
// innermost axis is resolved by convex 1-D minimization over its admissible
// lattice indices, which is equivalent to enumerating it.
// ---------------------------------------------------------------------------

struct ControlInstance {
    feederopt::FeederTopology topology;
    feederopt::NodeProfiles profiles;
    int pv_node = 1;           // single controlled node unless pv_nodes says otherwise
    double b_max = 0.0;
    double epsilon = 0.05;
};

struct ControlOracleResult {
    bool feasible = false;
    double objective = std::numeric_limits<double>::infinity();
    std::vector<double> x;  // [beta(node0, t...), beta(node1, t...), ..., q(node0, t...), ...]
};

namespace detail {

inline double simulate_loss(const ControlInstance& inst, const std::vector<double>& x) {
    const int n = inst.topology.n;
    const int T = inst.profiles.grid.T;
    const auto& pv = inst.profiles.pv_nodes;
    const int m = static_cast<int>(pv.size());
    feederopt::ControlSchedule sched = feederopt::ControlSchedule::zeros(n, T);
    for (int a = 0; a < m; ++a) {
        for (int t = 0; t < T; ++t) {
            sched.beta[pv[a]][t] = x[a * T + t];
            sched.q_g[pv[a]][t] = x[(m + a) * T + t];
        }
    }
    const auto state = feederopt::linear_flow(inst.topology, inst.profiles, sched);
    return feederopt::total_loss(state, inst.topology, feederopt::LossModel::Linear);
}

inline std::vector<double> simulate_voltages(const ControlInstance& inst,
                                             const std::vector<double>& x) {
    const int n = inst.topology.n;
    const int T = inst.profiles.grid.T;
    const auto& pv = inst.profiles.pv_nodes;
    const int m = static_cast<int>(pv.size());
    feederopt::ControlSchedule sched = feederopt::ControlSchedule::zeros(n, T);
    for (int a = 0; a < m; ++a) {
        for (int t = 0; t < T; ++t) {
            sched.beta[pv[a]][t] = x[a * T + t];
            sched.q_g[pv[a]][t] = x[(m + a) * T + t];
        }
    }
    const auto state = feederopt::linear_flow(inst.topology, inst.profiles, sched);
    std::vector<double> v;
    v.reserve(static_cast<size_t>(n) * T);
    for (int j = 1; j <= n; ++j) {
        for (int t = 0; t < T; ++t) v.push_back(state.V[j][t]);
    }
    return v;
}

struct AffineRow {
    std::vector<double> coef;
    double offset = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

}  // namespace detail

inline ControlOracleResult lattice_min_control(const ControlInstance& inst, int points) {
    using detail::AffineRow;
    const int T = inst.profiles.grid.T;
    const int m = static_cast<int>(inst.profiles.pv_nodes.size());
    const int d = 2 * m * T;
    const double dt = inst.profiles.grid.dt_hours;
    const double inf = std::numeric_limits<double>::infinity();

    // Recover the exact quadratic objective from simulator evaluations.
    const double h = 0.25;
    std::vector<double> zero(d, 0.0);
    const double c0 = detail::simulate_loss(inst, zero);
    std::vector<double> g(d), Hd(static_cast<size_t>(d) * d, 0.0);
    std::vector<double> plus(d), minus(d);
    for (int i = 0; i < d; ++i) {
        std::vector<double> xp = zero, xm = zero;
        xp[i] += h;
        xm[i] -= h;
        plus[i] = detail::simulate_loss(inst, xp);
        minus[i] = detail::simulate_loss(inst, xm);
        g[i] = (plus[i] - minus[i]) / (2.0 * h);
        Hd[i * d + i] = (plus[i] + minus[i] - 2.0 * c0) / (h * h);
    }
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            std::vector<double> xij = zero;
            xij[i] += h;
            xij[j] += h;
            const double mixed =
                (detail::simulate_loss(inst, xij) - plus[i] - plus[j] + c0) / (h * h);
            Hd[i * d + j] = mixed;
            Hd[j * d + i] = mixed;
        }
    }

    // Affine constraint rows: battery cumulative sums, VAR box, voltage band.
    std::vector<AffineRow> rows;
    for (int a = 0; a < m; ++a) {
        for (int t = 0; t < T; ++t) {
            AffineRow row;
            row.coef.assign(d, 0.0);
            for (int tau = 0; tau <= t; ++tau) row.coef[a * T + tau] = dt;
            row.lo = 0.0;
            row.hi = inst.b_max;
            rows.push_back(std::move(row));
        }
    }
    for (int a = 0; a < m; ++a) {
        const int node = inst.profiles.pv_nodes[a];
        for (int t = 0; t < T; ++t) {
            AffineRow row;
            row.coef.assign(d, 0.0);
            row.coef[(m + a) * T + t] = 1.0;
            row.lo = -inst.profiles.q_g_max[node][t];
            row.hi = inst.profiles.q_g_max[node][t];
            rows.push_back(std::move(row));
        }
    }
    {
        const auto v0 = detail::simulate_voltages(inst, zero);
        std::vector<std::vector<double>> vcoef(v0.size(), std::vector<double>(d, 0.0));
        for (int i = 0; i < d; ++i) {
            std::vector<double> xi = zero;
            xi[i] += h;
            const auto vi = detail::simulate_voltages(inst, xi);
            for (size_t r = 0; r < v0.size(); ++r) vcoef[r][i] = (vi[r] - v0[r]) / h;
        }
        for (size_t r = 0; r < v0.size(); ++r) {
            AffineRow row;
            row.coef = vcoef[r];
            row.offset = v0[r];
            row.lo = 1.0 - inst.epsilon;
            row.hi = 1.0 + inst.epsilon;
            rows.push_back(std::move(row));
        }
    }

    // Lattice boxes: battery rates bounded by a full charge/discharge per
    // slot, VAR by its capability.
    std::vector<double> lo(d), hi(d);
    for (int a = 0; a < m; ++a) {
        for (int t = 0; t < T; ++t) {
            lo[a * T + t] = -inst.b_max / dt;
            hi[a * T + t] = inst.b_max / dt;
            const int node = inst.profiles.pv_nodes[a];
            lo[(m + a) * T + t] = -inst.profiles.q_g_max[node][t];
            hi[(m + a) * T + t] = inst.profiles.q_g_max[node][t];
        }
    }

    const int din = d - 1;  // innermost axis, resolved by convex minimization
    const double step_in = (hi[din] - lo[din]) / (points - 1);
    const double slack = 1e-9;

    ControlOracleResult best;
    std::vector<int> idx(d - 1, 0);
    std::vector<double> x(d, 0.0);

    while (true) {
        for (int i = 0; i < d - 1; ++i) {
            const double step = (hi[i] - lo[i]) / (points - 1);
            x[i] = lo[i] + idx[i] * step;
        }
        // Admissible interval for the innermost variable.
        double in_lo = lo[din], in_hi = hi[din];
        for (const AffineRow& row : rows) {
            double base = row.offset;
            for (int i = 0; i < d - 1; ++i) base += row.coef[i] * x[i];
            const double c = row.coef[din];
            if (std::abs(c) < 1e-15) {
                if (base < row.lo - slack || base > row.hi + slack) {
                    in_lo = 1.0;
                    in_hi = 0.0;  // outer point infeasible
                    break;
                }
            } else if (c > 0.0) {
                in_lo = std::max(in_lo, (row.lo - slack - base) / c);
                in_hi = std::min(in_hi, (row.hi + slack - base) / c);
            } else {
                in_lo = std::max(in_lo, (row.hi + slack - base) / c);
                in_hi = std::min(in_hi, (row.lo - slack - base) / c);
            }
        }
        if (in_lo <= in_hi) {
            int ilo = step_in > 0.0
                          ? static_cast<int>(std::ceil((in_lo - lo[din]) / step_in - 1e-12))
                          : 0;
            int ihi = step_in > 0.0
                          ? static_cast<int>(std::floor((in_hi - lo[din]) / step_in + 1e-12))
                          : 0;
            ilo = std::max(ilo, 0);
            ihi = std::min(ihi, points - 1);
            if (ilo <= ihi) {
                // Quadratic along the innermost axis: evaluate at the convex
                // argmin index and its neighbors.
                double lin = g[din];
                for (int i = 0; i < d - 1; ++i) lin += Hd[din * d + i] * x[i];
                const double quad = 0.5 * Hd[din * d + din];
                int icand;
                if (quad > 1e-15) {
                    const double xstar = std::clamp(-lin / (2.0 * quad), lo[din], hi[din]);
                    icand = static_cast<int>(std::lround((xstar - lo[din]) / step_in));
                } else {
                    icand = lin > 0.0 ? ilo : ihi;
                }
                for (int ii = std::max(ilo, icand - 1); ii <= std::min(ihi, icand + 1); ++ii) {
                    x[din] = lo[din] + ii * step_in;
                    double obj = c0;
                    for (int i = 0; i < d; ++i) {
                        obj += g[i] * x[i];
                        for (int j = 0; j < d; ++j) obj += 0.5 * x[i] * Hd[i * d + j] * x[j];
                    }
                    if (obj < best.objective) {
                        best.objective = obj;
                        best.x = x;
                        best.feasible = true;
                    }
                }
                // Endpoint candidates guard against rounding at the interval edge.
                for (int ii : {ilo, ihi}) {
                    x[din] = lo[din] + ii * step_in;
                    double obj = c0;
                    for (int i = 0; i < d; ++i) {
                        obj += g[i] * x[i];
                        for (int j = 0; j < d; ++j) obj += 0.5 * x[i] * Hd[i * d + j] * x[j];
                    }
                    if (obj < best.objective) {
                        best.objective = obj;
                        best.x = x;
                        best.feasible = true;
                    }
                }
            }
        }
        int k = d - 2;
        while (k >= 0 && ++idx[k] == points) {
            idx[k] = 0;
            --k;
        }
        if (k < 0 || d == 1) break;
    }
    return best;
}

/// Fully naive variant for meta-checking the fast one on tiny instances.
inline ControlOracleResult lattice_min_control_naive(const ControlInstance& inst, int points) {
    const int T = inst.profiles.grid.T;
    const int m = static_cast<int>(inst.profiles.pv_nodes.size());
    const int d = 2 * m * T;
    const double dt = inst.profiles.grid.dt_hours;

    std::vector<double> lo(d), hi(d);
    for (int a = 0; a < m; ++a) {
        for (int t = 0; t < T; ++t) {
            lo[a * T + t] = -inst.b_max / dt;
            hi[a * T + t] = inst.b_max / dt;
            const int node = inst.profiles.pv_nodes[a];
            lo[(m + a) * T + t] = -inst.profiles.q_g_max[node][t];
            hi[(m + a) * T + t] = inst.profiles.q_g_max[node][t];
        }
    }

    ControlOracleResult best;
    std::vector<int> idx(d, 0);
    std::vector<double> x(d);
    const double slack = 1e-9;
    while (true) {
        for (int i = 0; i < d; ++i) {
            const double step = (hi[i] - lo[i]) / (points - 1);
            x[i] = lo[i] + idx[i] * step;
        }
        bool ok = true;
        for (int a = 0; a < m && ok; ++a) {
            double cum = 0.0;
            for (int t = 0; t < T && ok; ++t) {
                cum += x[a * T + t] * dt;
                if (cum < -slack || cum > inst.b_max + slack) ok = false;
            }
        }
        if (ok) {
            const auto v = detail::simulate_voltages(inst, x);
            for (double vv : v) {
                if (vv < 1.0 - inst.epsilon - slack || vv > 1.0 + inst.epsilon + slack) {
                    ok = false;
                    break;
                }
            }
        }
        if (ok) {
            const double obj = detail::simulate_loss(inst, x);
            if (obj < best.objective) {
                best.objective = obj;
                best.x = x;
                best.feasible = true;
            }
        }
        int k = d - 1;
        while (k >= 0 && ++idx[k] == points) {
            idx[k] = 0;
            --k;
        }
        if (k < 0) break;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Scalar fixed point for a single-segment feeder: P0 = p + r * P0^2 / V0^2.
// ---------------------------------------------------------------------------
inline double single_segment_substation_flow(double p, double q, double r, double tol = 1e-15) {
    double P = p, Q = q;
    for (int i = 0; i < 1000; ++i) {
        const double Pn = p + r * (P * P + Q * Q);
        if (std::abs(Pn - P) < tol) return Pn;
        P = Pn;
    }
    return P;
}

/// Hand-fillable profile container for tiny instances.
inline feederopt::NodeProfiles make_profiles(int n, int T, double dt_hours) {
    feederopt::NodeProfiles np;
    np.n = n;
    np.grid.T = T;
    np.grid.dt_hours = dt_hours;
    np.grid.slots_per_hour = 1;
    np.p_c.assign(n + 1, std::vector<double>(T, 0.0));
    np.q_c.assign(n + 1, std::vector<double>(T, 0.0));
    np.p_g.assign(n + 1, std::vector<double>(T, 0.0));
    np.q_g_max.assign(n + 1, std::vector<double>(T, 0.0));
    np.s.assign(n + 1, 0.0);
    return np;
}

}  // namespace oracles
