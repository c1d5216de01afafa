// Synthetic susceptibility field driving the simulated targets.
//
// Ground-truth fault probability at (coordinate, pulse) is
//
//     min(1, sum_h amplitude_h * exp(-d_h^2 / (2 sigma_h^2)) * gate_h)
//       * exp(-z / height_scale)
//       * sigmoid((voltage - voltage_midpoint) * voltage_steepness)
//
// where d_h is the planar distance to hotspot h. On a timed field, gate_h is
// 1 when the pulse offset falls inside [window_start_ns, window_end_ns] of
// hotspot h and 0 otherwise; on an untimed field (external SRAM, no firmware
// trigger to align with) the gate is always 1. The factorized form makes the
// physical laws exact: the probability never increases with probe height and
// never decreases with discharge voltage.

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "emfi/classify.hpp"
#include "emfi/geometry.hpp"
#include "emfi/pulse.hpp"

namespace emfi {

// Relative likelihood of each fault class when this hotspot fires.
struct FaultAffinity {
    double control_flow = 0.0;
    double data_corruption = 1.0;
    double system_level = 0.0;

    void validate() const {
        if (control_flow < 0.0 || data_corruption < 0.0 || system_level < 0.0)
            throw std::invalid_argument("FaultAffinity weights must be >= 0");
        const double sum = control_flow + data_corruption + system_level;
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("FaultAffinity weights must sum to 1");
    }
};

struct Hotspot {
    double center_x = 0.0;
    double center_y = 0.0;
    double sigma_mm = 1.0;          // Gaussian footprint, > 0
    double amplitude = 0.5;         // peak probability contribution, in (0, 1]
    FaultAffinity affinity;
    double window_start_ns = 0.0;   // used only on timed fields
    double window_end_ns = 0.0;

    void validate() const {
        if (!(sigma_mm > 0.0)) throw std::invalid_argument("Hotspot.sigma_mm must be > 0");
        if (!(amplitude > 0.0 && amplitude <= 1.0))
            throw std::invalid_argument("Hotspot.amplitude must be in (0, 1]");
        if (window_end_ns < window_start_ns)
            throw std::invalid_argument("Hotspot window_end_ns < window_start_ns");
        affinity.validate();
    }

    bool in_window(double offset_ns) const {
        return offset_ns >= window_start_ns && offset_ns <= window_end_ns;
    }
};

struct SusceptibilityField {
    std::vector<Hotspot> hotspots;
    double height_scale_mm = 2.0;       // > 0
    double voltage_midpoint_v = 250.0;
    double voltage_steepness_per_v = 0.02;  // >= 0
    bool timed = false;                 // offsets gate the hotspots

    void validate() const {
        if (!(height_scale_mm > 0.0))
            throw std::invalid_argument("SusceptibilityField.height_scale_mm must be > 0");
        if (voltage_steepness_per_v < 0.0)
            throw std::invalid_argument("SusceptibilityField.voltage_steepness_per_v must be >= 0");
        for (const Hotspot& h : hotspots) h.validate();
    }
};

namespace detail {

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

inline double hotspot_contribution(const Hotspot& h, double x, double y) {
    const double dx = x - h.center_x;
    const double dy = y - h.center_y;
    return h.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * h.sigma_mm * h.sigma_mm));
}

}  // namespace detail

// Spatial sum before clamping; also the intensity knob for flip magnitudes.
inline double local_intensity(const SusceptibilityField& field, const ProbeCoordinate& c,
                              const PulseParameters& p) {
    double sum = 0.0;
    for (const Hotspot& h : field.hotspots) {
        if (field.timed && !h.in_window(p.offset_ns)) continue;
        sum += detail::hotspot_contribution(h, c.x, c.y);
    }
    return sum * std::exp(-c.z / field.height_scale_mm) *
           detail::sigmoid((p.voltage_v - field.voltage_midpoint_v) * field.voltage_steepness_per_v);
}

inline double ground_truth_probability(const SusceptibilityField& field, const ProbeCoordinate& c,
                                       const PulseParameters& p) {
    double sum = 0.0;
    for (const Hotspot& h : field.hotspots) {
        if (field.timed && !h.in_window(p.offset_ns)) continue;
        sum += detail::hotspot_contribution(h, c.x, c.y);
    }
    return std::min(1.0, sum) * std::exp(-c.z / field.height_scale_mm) *
           detail::sigmoid((p.voltage_v - field.voltage_midpoint_v) * field.voltage_steepness_per_v);
}

// Hotspot whose gated contribution dominates at (x, y); nullptr when nothing
// contributes (probability is 0 there, so no fault can fire anyway).
inline const Hotspot* dominant_hotspot(const SusceptibilityField& field, const ProbeCoordinate& c,
                                       const PulseParameters& p) {
    const Hotspot* best = nullptr;
    double best_value = 0.0;
    for (const Hotspot& h : field.hotspots) {
        if (field.timed && !h.in_window(p.offset_ns)) continue;
        const double value = detail::hotspot_contribution(h, c.x, c.y);
        if (value > best_value) {
            best_value = value;
            best = &h;
        }
    }
    return best;
}

}  // namespace emfi
