#include <doctest.h>

#include <algorithm>

#include "feederopt/metrics.hpp"
#include "oracles.hpp"

using namespace feederopt;

namespace {

NetworkState state_from_voltages(const std::vector<std::vector<double>>& v_by_slot) {
    // v_by_slot[t] holds the node voltages of slot t, node 0 first.
    NetworkState state;
    state.T = static_cast<int>(v_by_slot.size());
    state.n = static_cast<int>(v_by_slot[0].size()) - 1;
    state.V.assign(state.n + 1, std::vector<double>(state.T, 1.0));
    for (int t = 0; t < state.T; ++t) {
        for (int j = 0; j <= state.n; ++j) state.V[j][t] = v_by_slot[t][j];
    }
    return state;
}

}  // namespace

TEST_CASE("voltage_variation") {
    SUBCASE("flat profile has no variation") {
        auto state = state_from_voltages({{1.0, 1.0, 1.0}});
        CHECK(voltage_variation(state) == 0.0);
    }

    SUBCASE("single slot arithmetic") {
        auto state = state_from_voltages({{1.0, 0.98, 0.95}});
        CHECK(voltage_variation(state) == doctest::Approx(0.05));
    }

    SUBCASE("maximum over slots, overvoltage included") {
        auto state = state_from_voltages({{1.0, 0.99}, {1.0, 1.03}});
        CHECK(voltage_variation(state) == doctest::Approx(0.03));
    }

    SUBCASE("invariant to slot reordering and flat padding") {
        oracles::Rng rng(5);
        std::vector<std::vector<double>> slots;
        for (int t = 0; t < 6; ++t) {
            std::vector<double> v{1.0};
            for (int j = 0; j < 4; ++j) v.push_back(rng.uniform(0.9, 1.1));
            slots.push_back(v);
        }
        const double base = voltage_variation(state_from_voltages(slots));

        auto shuffled = slots;
        std::reverse(shuffled.begin(), shuffled.end());
        CHECK(voltage_variation(state_from_voltages(shuffled)) == doctest::Approx(base));

        auto padded = slots;
        padded.push_back({1.0, 1.0, 1.0, 1.0, 1.0});
        CHECK(voltage_variation(state_from_voltages(padded)) == doctest::Approx(base));
    }
}

TEST_CASE("energy_savings") {
    SUBCASE("equal losses save nothing") {
        CHECK(energy_savings(5.0, 5.0) == 0.0);
    }

    SUBCASE("reference arithmetic") {
        CHECK(energy_savings(100.0, 91.0) == doctest::Approx(0.09));
    }

    SUBCASE("worse than baseline is signed, not clamped") {
        CHECK(energy_savings(100.0, 110.0) == doctest::Approx(-0.10));
    }

    SUBCASE("degenerate baseline is an error") {
        CHECK_THROWS_AS(energy_savings(0.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(energy_savings(-1.0, 1.0), std::invalid_argument);
    }

    SUBCASE("strictly decreasing in the method loss") {
        oracles::Rng rng(9);
        for (int rep = 0; rep < 50; ++rep) {
            const double base = rng.uniform(0.1, 10.0);
            const double m1 = rng.uniform(0.0, 10.0);
            const double m2 = m1 + rng.uniform(0.01, 1.0);
            CHECK(energy_savings(base, m1) > energy_savings(base, m2));
            CHECK(energy_savings(base, base) == 0.0);
        }
    }
}
