// One trial = one reset-arm-inject-observe cycle. The record captures
// everything needed to reproduce and re-verify the trial: identity, derived
// seed, raw target output, and the stored classification. The wall-clock
// timestamp is recorded but excluded from determinism comparisons.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emfi/classify.hpp"
#include "emfi/geometry.hpp"
#include "emfi/pulse.hpp"

namespace emfi {

struct TrialRecord {
    std::string campaign_id;
    std::string config_hash;       // hex digest of the canonical config
    std::uint64_t sequence = 0;    // monotonic log sequence number
    std::uint32_t stage = 0;       // refinement level (0 = coarse scan)
    std::uint32_t grid_index = 0;  // grid within the stage (stages can refine several regions)
    std::uint64_t coordinate_index = 0;  // campaign-global, feeds seed derivation
    std::uint64_t param_index = 0;
    std::uint64_t trial_index = 0;
    std::uint64_t trial_seed = 0;
    ProbeCoordinate coordinate;
    PulseParameters parameters;
    std::vector<std::string> raw_lines;
    bool responded = true;
    std::uint32_t duration_ms = 0;
    FaultObservation classification;
    std::uint32_t error_count = 0;
    std::int64_t timestamp_ms = 0;
};

}  // namespace emfi
