// Pulse parameter space: a single injection's knobs plus sweep enumeration.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace emfi {

enum class Polarity { Normal, Reversed };

inline const char* to_string(Polarity p) {
    return p == Polarity::Normal ? "normal" : "reversed";
}

struct PulseParameters {
    double voltage_v = 0.0;       // discharge voltage, > 0
    double width_ns = 0.0;        // pulse width, > 0
    Polarity polarity = Polarity::Normal;
    double offset_ns = 0.0;       // delay past the trigger marker, >= 0

    void validate() const {
        if (!(voltage_v > 0.0)) throw std::invalid_argument("PulseParameters.voltage_v must be > 0");
        if (!(width_ns > 0.0)) throw std::invalid_argument("PulseParameters.width_ns must be > 0");
        if (!(offset_ns >= 0.0)) throw std::invalid_argument("PulseParameters.offset_ns must be >= 0");
    }

    friend bool operator==(const PulseParameters&, const PulseParameters&) = default;
};

struct SweepSpec {
    std::vector<double> voltages_v;
    std::vector<double> widths_ns;
    std::vector<Polarity> polarities;
    std::vector<double> offsets_ns;
    std::size_t trials_per_point = 1;

    std::size_t point_count() const {
        return voltages_v.size() * widths_ns.size() * polarities.size() * offsets_ns.size();
    }

    void validate() const {
        if (voltages_v.empty()) throw std::invalid_argument("SweepSpec.voltages_v must not be empty");
        if (widths_ns.empty()) throw std::invalid_argument("SweepSpec.widths_ns must not be empty");
        if (polarities.empty()) throw std::invalid_argument("SweepSpec.polarities must not be empty");
        if (offsets_ns.empty()) throw std::invalid_argument("SweepSpec.offsets_ns must not be empty");
        if (trials_per_point < 1) throw std::invalid_argument("SweepSpec.trials_per_point must be >= 1");
        for (double v : voltages_v)
            if (!(v > 0.0)) throw std::invalid_argument("SweepSpec.voltages_v entries must be > 0");
        for (double w : widths_ns)
            if (!(w > 0.0)) throw std::invalid_argument("SweepSpec.widths_ns entries must be > 0");
        for (double o : offsets_ns)
            if (!(o >= 0.0)) throw std::invalid_argument("SweepSpec.offsets_ns entries must be >= 0");
    }
};

// Full Cartesian product in lexicographic order: voltage varies slowest,
// then width, polarity, and offset.
inline std::vector<PulseParameters> enumerate_sweep(const SweepSpec& spec) {
    spec.validate();
    std::vector<PulseParameters> out;
    out.reserve(spec.point_count());
    for (double v : spec.voltages_v)
        for (double w : spec.widths_ns)
            for (Polarity pol : spec.polarities)
                for (double off : spec.offsets_ns)
                    out.push_back({v, w, pol, off});
    return out;
}

struct ParameterBound {
    double min = 0.0;
    double max = 0.0;
};

struct ParameterLimits {
    ParameterBound voltage_v{50.0, 500.0};
    ParameterBound width_ns{1.0, 1000.0};
    ParameterBound offset_ns{0.0, 1e9};

    void validate() const {
        if (voltage_v.min > voltage_v.max) throw std::invalid_argument("limits.voltage_v min > max");
        if (width_ns.min > width_ns.max) throw std::invalid_argument("limits.width_ns min > max");
        if (offset_ns.min > offset_ns.max) throw std::invalid_argument("limits.offset_ns min > max");
    }
};

struct LimitViolation {
    std::string field;
    double value = 0.0;
    double bound = 0.0;
    bool above = false;  // true: value > max, false: value < min
};

// Violations are data, not errors; returns one entry per violated bound in
// stable field order (voltage, width, offset).
inline std::vector<LimitViolation> validate_parameters(const PulseParameters& p,
                                                       const ParameterLimits& limits) {
    limits.validate();
    std::vector<LimitViolation> out;
    const auto check = [&](const char* name, double value, const ParameterBound& b) {
        if (value < b.min) out.push_back({name, value, b.min, false});
        else if (value > b.max) out.push_back({name, value, b.max, true});
    };
    check("voltage_v", p.voltage_v, limits.voltage_v);
    check("width_ns", p.width_ns, limits.width_ns);
    check("offset_ns", p.offset_ns, limits.offset_ns);
    return out;
}

}  // namespace emfi
