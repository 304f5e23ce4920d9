#include "feederopt/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace feederopt {

double FeederTopology::cumulative_r(int m) const {
    double sum = 0.0;
    for (int i = 0; i < m && i < n; ++i) sum += segments[i].r_pu;
    return sum;
}

double FeederTopology::cumulative_x(int m) const {
    double sum = 0.0;
    for (int i = 0; i < m && i < n; ++i) sum += segments[i].x_pu;
    return sum;
}

bool PvPlacement::contains(int node) const {
    return std::binary_search(pv_nodes.begin(), pv_nodes.end(), node);
}

FeederTopology build_feeder(int n, const std::vector<double>& lengths_m,
                            double r_ohm_per_km, double x_ohm_per_km,
                            const PerUnitBase& base) {
    if (n <= 0) throw std::invalid_argument("build_feeder: n must be positive");
    if (static_cast<int>(lengths_m.size()) != n) {
        throw std::invalid_argument("build_feeder: expected " + std::to_string(n) +
                                    " segment lengths, got " + std::to_string(lengths_m.size()));
    }
    if (r_ohm_per_km < 0.0 || x_ohm_per_km < 0.0) {
        throw std::invalid_argument("build_feeder: impedance densities must be nonnegative");
    }

    FeederTopology topo;
    topo.n = n;
    topo.base = base;
    topo.segments.resize(n);
    const double z_base = base.z_base_ohm();
    for (int j = 0; j < n; ++j) {
        const double len = lengths_m[j];
        if (!(len > 0.0)) {
            throw std::invalid_argument("build_feeder: segment length must be positive");
        }
        topo.segments[j].length_m = len;
        topo.segments[j].r_pu = r_ohm_per_km * (len / 1000.0) / z_base;
        topo.segments[j].x_pu = x_ohm_per_km * (len / 1000.0) / z_base;
    }
    return topo;
}

std::vector<double> sample_lengths(int n, double min_m, double max_m, std::uint64_t seed) {
    if (n <= 0) throw std::invalid_argument("sample_lengths: n must be positive");
    if (!(min_m > 0.0)) throw std::invalid_argument("sample_lengths: min_m must be positive");
    if (min_m > max_m) throw std::invalid_argument("sample_lengths: min_m > max_m");

    // std::uniform_real_distribution is implementation-defined, so draw
    // uniform doubles from the raw 64-bit stream to keep results portable.
    std::mt19937_64 rng(seed);
    std::vector<double> lengths(n);
    for (int j = 0; j < n; ++j) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
        lengths[j] = min_m + u * (max_m - min_m);
    }
    return lengths;
}

PvPlacement place_pv(int n, double a, PlacementKind kind) {
    if (n <= 0) throw std::invalid_argument("place_pv: n must be positive");
    if (!(a > 0.0) || a > 1.0) throw std::invalid_argument("place_pv: penetration must be in (0, 1]");

    const int m = static_cast<int>(std::floor(a * n + 0.5));  // round half-up
    if (m < 1) throw std::invalid_argument("place_pv: round(a*n) is zero, no PV node to place");

    PvPlacement placement;
    placement.kind = kind;
    placement.penetration = a;
    placement.pv_nodes.reserve(m);
    const int first = (kind == PlacementKind::Front) ? 1 : n - m + 1;
    for (int k = 0; k < m; ++k) placement.pv_nodes.push_back(first + k);
    return placement;
}

const char* to_string(PlacementKind kind) {
    return kind == PlacementKind::Front ? "front" : "rear";
}

}  // namespace feederopt
