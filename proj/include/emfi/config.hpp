// Campaign configuration: a human-editable JSON document mirroring
// CampaignConfig field-for-field. The canonical dump of the effective
// config is hashed (FNV-1a 64) and stamped into every trial record, so a
// log always identifies the exact configuration that produced it.

#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "emfi/field.hpp"
#include "emfi/geometry.hpp"
#include "emfi/pulse.hpp"
#include "emfi/rng.hpp"
#include "emfi/targets.hpp"

namespace emfi {

struct RefinementSettings {
    double threshold = 0.25;   // fault rate that qualifies a cell as a region of interest
    int factor = 2;            // pitch divisor per refinement level
    int max_levels = 3;        // refinement rounds after the coarse scan
    bool refine_best_param_only = false;

    void validate() const {
        if (!(threshold >= 0.0 && threshold <= 1.0))
            throw std::invalid_argument("refinement.threshold must be in [0, 1]");
        if (factor < 2) throw std::invalid_argument("refinement.factor must be >= 2");
        if (max_levels < 0) throw std::invalid_argument("refinement.max_levels must be >= 0");
    }
};

struct CampaignConfig {
    std::string campaign_id = "campaign";
    std::uint64_t seed = 0;
    GridSpec grid;
    RefinementSettings refinement;
    SweepSpec sweep{.voltages_v = {150.0, 250.0, 350.0},
                    .widths_ns = {45.0, 80.0},
                    .polarities = {Polarity::Normal},
                    .offsets_ns = {0.0, 10.0, 20.0},
                    .trials_per_point = 20};
    TargetKind target_kind = TargetKind::SramSim;
    std::size_t loop_iterations = 10;  // MCU loop marker count
    SusceptibilityField field;
    ParameterLimits limits;
    std::uint32_t timeout_ms = kDefaultTimeoutMs;

    void validate() const {
        if (campaign_id.empty()) throw std::invalid_argument("campaign_id must not be empty");
        for (char c : campaign_id) {
            const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                            (c >= '0' && c <= '9') || c == '_' || c == '-';
            if (!ok)
                throw std::invalid_argument(
                    "campaign_id may only contain [A-Za-z0-9_-], got \"" + campaign_id + "\"");
        }
        grid.validate();
        refinement.validate();
        sweep.validate();
        limits.validate();
        field.validate();
        if (loop_iterations < 1) throw std::invalid_argument("loop_iterations must be >= 1");
        if (timeout_ms < 1) throw std::invalid_argument("timeout_ms must be >= 1");
        for (const PulseParameters& p : enumerate_sweep(sweep)) {
            const auto violations = validate_parameters(p, limits);
            if (!violations.empty()) {
                std::ostringstream oss;
                oss << "sweep point violates limits:";
                for (const LimitViolation& v : violations)
                    oss << ' ' << v.field << '=' << v.value << (v.above ? " > " : " < ")
                        << v.bound;
                throw std::invalid_argument(oss.str());
            }
        }
    }
};

inline std::unique_ptr<TargetBackend> make_target(const CampaignConfig& config) {
    SusceptibilityField field = config.field;
    switch (config.target_kind) {
        case TargetKind::SramSim:
            return std::make_unique<SramSimTarget>(std::move(field));
        case TargetKind::McuSim:
            return std::make_unique<McuSimTarget>(std::move(field), config.loop_iterations,
                                                  config.timeout_ms);
        case TargetKind::DebugSim:
            return std::make_unique<DebugSimTarget>(std::move(field));
    }
    throw std::invalid_argument("unknown target kind");
}

// ---- JSON mapping -------------------------------------------------------

inline Polarity polarity_from_string(const std::string& s) {
    if (s == "normal") return Polarity::Normal;
    if (s == "reversed") return Polarity::Reversed;
    throw std::runtime_error("unknown polarity \"" + s + "\" (expected normal|reversed)");
}

inline TargetKind target_kind_from_string(const std::string& s) {
    if (s == "sram_sim") return TargetKind::SramSim;
    if (s == "mcu_sim") return TargetKind::McuSim;
    if (s == "debug_sim") return TargetKind::DebugSim;
    throw std::runtime_error("unknown target kind \"" + s +
                             "\" (expected sram_sim|mcu_sim|debug_sim)");
}

inline nlohmann::json to_json(const GridSpec& g) {
    return {{"origin", {g.origin_x, g.origin_y}},
            {"pitch", g.pitch},
            {"nx", g.nx},
            {"ny", g.ny},
            {"z", g.z}};
}

inline GridSpec grid_from_json(const nlohmann::json& j) {
    GridSpec g;
    const auto& origin = j.at("origin");
    g.origin_x = origin.at(0).get<double>();
    g.origin_y = origin.at(1).get<double>();
    g.pitch = j.at("pitch").get<double>();
    g.nx = j.at("nx").get<std::size_t>();
    g.ny = j.at("ny").get<std::size_t>();
    g.z = j.value("z", 0.0);
    return g;
}

inline nlohmann::json to_json(const SusceptibilityField& f) {
    nlohmann::json hotspots = nlohmann::json::array();
    for (const Hotspot& h : f.hotspots) {
        hotspots.push_back({{"center", {h.center_x, h.center_y}},
                            {"sigma_mm", h.sigma_mm},
                            {"amplitude", h.amplitude},
                            {"affinity",
                             {{"control_flow", h.affinity.control_flow},
                              {"data_corruption", h.affinity.data_corruption},
                              {"system_level", h.affinity.system_level}}},
                            {"window_ns", {h.window_start_ns, h.window_end_ns}}});
    }
    return {{"hotspots", hotspots},
            {"height_scale_mm", f.height_scale_mm},
            {"voltage_midpoint_v", f.voltage_midpoint_v},
            {"voltage_steepness_per_v", f.voltage_steepness_per_v}};
}

inline SusceptibilityField field_from_json(const nlohmann::json& j) {
    SusceptibilityField f;
    for (const auto& hj : j.value("hotspots", nlohmann::json::array())) {
        Hotspot h;
        const auto& center = hj.at("center");
        h.center_x = center.at(0).get<double>();
        h.center_y = center.at(1).get<double>();
        h.sigma_mm = hj.at("sigma_mm").get<double>();
        h.amplitude = hj.at("amplitude").get<double>();
        if (hj.contains("affinity")) {
            const auto& aj = hj.at("affinity");
            h.affinity.control_flow = aj.value("control_flow", 0.0);
            h.affinity.data_corruption = aj.value("data_corruption", 0.0);
            h.affinity.system_level = aj.value("system_level", 0.0);
        }
        if (hj.contains("window_ns")) {
            const auto& w = hj.at("window_ns");
            h.window_start_ns = w.at(0).get<double>();
            h.window_end_ns = w.at(1).get<double>();
        }
        f.hotspots.push_back(h);
    }
    f.height_scale_mm = j.value("height_scale_mm", 2.0);
    f.voltage_midpoint_v = j.value("voltage_midpoint_v", 250.0);
    f.voltage_steepness_per_v = j.value("voltage_steepness_per_v", 0.02);
    return f;
}

inline nlohmann::json to_json(const CampaignConfig& c) {
    nlohmann::json polarities = nlohmann::json::array();
    for (Polarity p : c.sweep.polarities) polarities.push_back(to_string(p));
    return {
        {"campaign_id", c.campaign_id},
        {"seed", c.seed},
        {"grid", to_json(c.grid)},
        {"refinement",
         {{"threshold", c.refinement.threshold},
          {"factor", c.refinement.factor},
          {"max_levels", c.refinement.max_levels},
          {"refine_best_param_only", c.refinement.refine_best_param_only}}},
        {"sweep",
         {{"voltages_v", c.sweep.voltages_v},
          {"widths_ns", c.sweep.widths_ns},
          {"polarities", polarities},
          {"offsets_ns", c.sweep.offsets_ns},
          {"trials_per_point", c.sweep.trials_per_point}}},
        {"target",
         {{"kind", to_string(c.target_kind)},
          {"loop_iterations", c.loop_iterations},
          {"field", to_json(c.field)}}},
        {"limits",
         {{"voltage_v", {c.limits.voltage_v.min, c.limits.voltage_v.max}},
          {"width_ns", {c.limits.width_ns.min, c.limits.width_ns.max}},
          {"offset_ns", {c.limits.offset_ns.min, c.limits.offset_ns.max}}}},
        {"timeout_ms", c.timeout_ms},
    };
}

inline CampaignConfig config_from_json(const nlohmann::json& j) {
    CampaignConfig c;
    c.campaign_id = j.value("campaign_id", std::string{"campaign"});
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
    if (j.contains("refinement")) {
        const auto& rj = j.at("refinement");
        c.refinement.threshold = rj.value("threshold", c.refinement.threshold);
        c.refinement.factor = rj.value("factor", c.refinement.factor);
        c.refinement.max_levels = rj.value("max_levels", c.refinement.max_levels);
        c.refinement.refine_best_param_only =
            rj.value("refine_best_param_only", c.refinement.refine_best_param_only);
    }
    if (j.contains("sweep")) {
        const auto& sj = j.at("sweep");
        if (sj.contains("voltages_v")) c.sweep.voltages_v = sj.at("voltages_v").get<std::vector<double>>();
        if (sj.contains("widths_ns")) c.sweep.widths_ns = sj.at("widths_ns").get<std::vector<double>>();
        if (sj.contains("polarities")) {
            c.sweep.polarities.clear();
            for (const auto& pj : sj.at("polarities"))
                c.sweep.polarities.push_back(polarity_from_string(pj.get<std::string>()));
        }
        if (sj.contains("offsets_ns")) c.sweep.offsets_ns = sj.at("offsets_ns").get<std::vector<double>>();
        c.sweep.trials_per_point = sj.value("trials_per_point", c.sweep.trials_per_point);
    }
    if (j.contains("target")) {
        const auto& tj = j.at("target");
        c.target_kind = target_kind_from_string(tj.value("kind", std::string{"sram_sim"}));
        c.loop_iterations = tj.value("loop_iterations", c.loop_iterations);
        if (tj.contains("field")) c.field = field_from_json(tj.at("field"));
    }
    if (j.contains("limits")) {
        const auto& lj = j.at("limits");
        const auto bound = [&](const char* key, ParameterBound fallback) {
            if (!lj.contains(key)) return fallback;
            const auto& bj = lj.at(key);
            return ParameterBound{bj.at(0).get<double>(), bj.at(1).get<double>()};
        };
        c.limits.voltage_v = bound("voltage_v", c.limits.voltage_v);
        c.limits.width_ns = bound("width_ns", c.limits.width_ns);
        c.limits.offset_ns = bound("offset_ns", c.limits.offset_ns);
    }
    c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
    return c;
}

inline CampaignConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("config " + path + " is not valid JSON: " + e.what());
    }
    CampaignConfig c = config_from_json(j);
    c.validate();
    return c;
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

inline std::string hex16(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

// Digest of the canonical (key-sorted) JSON form of the effective config.
inline std::string config_hash(const CampaignConfig& c) {
    return hex16(fnv1a64(to_json(c).dump()));
}

// Stable label for one pulse-parameter point, used in artifact file names.
inline std::string param_point_hash(const PulseParameters& p) {
    std::uint64_t h = mix64(std::bit_cast<std::uint64_t>(p.voltage_v));
    h = mix64(h + std::bit_cast<std::uint64_t>(p.width_ns));
    h = mix64(h + (p.polarity == Polarity::Normal ? 0u : 1u));
    h = mix64(h + std::bit_cast<std::uint64_t>(p.offset_ns));
    return hex16(h);
}

}  // namespace emfi
