#pragma once

#include <stdexcept>

namespace feederopt {

/// Per-unit normalization bases for a single-phase equivalent circuit.
/// Voltages are normalized by v_base (line-to-neutral volts), powers by
/// s_base (volt-amperes), impedances by z_base = v_base^2 / s_base.
struct PerUnitBase {
    double v_base_v = 7200.0;
    double s_base_va = 1.0e6;

    PerUnitBase() = default;
    PerUnitBase(double v_base, double s_base) : v_base_v(v_base), s_base_va(s_base) {
        if (v_base_v <= 0.0 || s_base_va <= 0.0) {
            throw std::invalid_argument("PerUnitBase: bases must be positive");
        }
    }

    static PerUnitBase from_kv_kva(double v_base_kv, double s_base_kva) {
        return PerUnitBase(v_base_kv * 1e3, s_base_kva * 1e3);
    }

    double z_base_ohm() const { return v_base_v * v_base_v / s_base_va; }

    double impedance_to_pu(double ohm) const { return ohm / z_base_ohm(); }
    double impedance_to_ohm(double pu) const { return pu * z_base_ohm(); }
    double power_to_pu(double watts) const { return watts / s_base_va; }
    double power_to_watts(double pu) const { return pu * s_base_va; }
};

}  // namespace feederopt
