#pragma once

#include <cmath>
#include <stdexcept>

#include "feederopt/distflow.hpp"

namespace feederopt {

struct ScenarioMetrics {
    double delta_v = 0.0;
    double loss = 0.0;
    double savings = 0.0;
};

/// Worst per-unit voltage deviation from the substation over all nodes and
/// slots. The substation voltage is pinned at 1, so the denominator never
/// varies.
inline double voltage_variation(const NetworkState& state) {
    double worst = 0.0;
    for (int t = 0; t < state.T; ++t) {
        const double v0 = state.V[0][t];
        for (int j = 0; j <= state.n; ++j) {
            worst = std::max(worst, std::abs((state.V[j][t] - v0) / v0));
        }
    }
    return worst;
}

/// Fractional loss reduction against the no-inverter-control baseline.
/// Signed: a method worse than the baseline yields negative savings.
inline double energy_savings(double loss_baseline, double loss_method) {
    if (!(loss_baseline > 0.0)) {
        throw std::invalid_argument("energy_savings: baseline loss must be positive");
    }
    return (loss_baseline - loss_method) / loss_baseline;
}

}  // namespace feederopt
