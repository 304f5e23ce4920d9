#pragma once

#include <cstdint>
#include <vector>

#include "feederopt/per_unit.hpp"

namespace feederopt {

/// One line segment of the radial feeder. Segment j connects node j to
/// node j+1; impedances are per-unit on the feeder base.
struct Segment {
    double length_m = 0.0;
    double r_pu = 0.0;
    double x_pu = 0.0;
};

/// Single-branch radial feeder with n+1 nodes. Node 0 is the substation,
/// nodes 1..n carry load. Immutable after construction.
struct FeederTopology {
    int n = 0;  // number of non-substation nodes == number of segments
    std::vector<Segment> segments;
    PerUnitBase base;

    /// Sum of segment resistances from the substation up to (excluding)
    /// node m, i.e. segments 0..m-1. cumulative_r(0) == 0.
    double cumulative_r(int m) const;
    double cumulative_x(int m) const;
};

enum class PlacementKind { Front, Rear };

/// Contiguous block of PV-plus-battery nodes at one end of the feeder.
struct PvPlacement {
    std::vector<int> pv_nodes;  // ascending node indices in 1..n
    PlacementKind kind = PlacementKind::Front;
    double penetration = 0.0;

    bool contains(int node) const;
};

/// Build the feeder from physical line data. Lengths are in meters,
/// impedance densities in ohms per km; segment impedances come out in
/// per-unit on `base`.
FeederTopology build_feeder(int n, const std::vector<double>& lengths_m,
                            double r_ohm_per_km, double x_ohm_per_km,
                            const PerUnitBase& base);

/// Draw n segment lengths uniformly from [min_m, max_m]. Deterministic for
/// a fixed seed and independent of platform.
std::vector<double> sample_lengths(int n, double min_m, double max_m, std::uint64_t seed);

/// Assign round(a*n) contiguous PV nodes to the front (starting at node 1)
/// or rear (ending at node n) of the feeder. Rounding is half-up.
PvPlacement place_pv(int n, double a, PlacementKind kind);

const char* to_string(PlacementKind kind);

}  // namespace feederopt
