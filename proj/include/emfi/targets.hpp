// Deterministic simulated targets.
//
// Three backends mirror the observability tiers of real boards: an external
// SRAM whose sentinel image exposes raw bit flips, an MCU whose firmware
// emits loop markers and CRC checks over UART, and a debug-probe target that
// reports register snapshots at breakpoints. Every injection is a pure
// function of (coordinate, parameters, trial_seed); all randomness flows
// through CounterRng, so observations are bit-identical across processes
// and platforms.

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "emfi/classify.hpp"
#include "emfi/field.hpp"
#include "emfi/geometry.hpp"
#include "emfi/protocol.hpp"
#include "emfi/pulse.hpp"
#include "emfi/rng.hpp"

namespace emfi {

struct RawObservation {
    std::vector<std::string> output_lines;
    bool responded = true;        // false models a hang
    std::uint32_t duration_ms = 0;
};

class TargetBackend {
public:
    virtual ~TargetBackend() = default;

    // Restores nominal state. One armed execution per inject() call; a
    // single instance is not meant for concurrent use.
    virtual void reset() = 0;
    virtual RawObservation inject(const ProbeCoordinate& c, const PulseParameters& p,
                                  std::uint64_t trial_seed) = 0;
    virtual NominalProfile nominal_profile() const = 0;
    virtual const SusceptibilityField& field() const = 0;
};

inline constexpr std::size_t kSentinelBytes = 1024;
inline constexpr std::uint8_t kSentinelPattern = 0xA5;  // equal 1/0 bit density
inline constexpr double kPolarityBias = 0.75;           // dominant-direction flip fraction
inline constexpr std::uint32_t kMaxFlipsPerTrial = 64;
inline constexpr std::uint32_t kNominalDurationMs = 25;
inline constexpr std::uint32_t kDefaultTimeoutMs = 500;

namespace detail {

inline std::string hex(std::uint64_t value, int digits) {
    char buf[16];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, 16);
    std::string s(buf, end);
    if (static_cast<int>(s.size()) < digits) s.insert(0, digits - s.size(), '0');
    return "0x" + s;
}

inline std::string dec(std::uint64_t value) { return std::to_string(value); }

}  // namespace detail

// External-SRAM target: the sentinel image is written on reset, one pulse is
// injected, and a full read-back comparison is reported as BITFLIP lines in
// address order. Flip direction is polarity-biased: the dominant direction
// (Normal -> 0-to-1, Reversed -> 1-to-0) carries kPolarityBias of the flips.
class SramSimTarget final : public TargetBackend {
public:
    explicit SramSimTarget(SusceptibilityField field) : field_(std::move(field)) {
        field_.timed = false;
        field_.validate();
    }

    void reset() override {}  // inject() always starts from the pristine image

    RawObservation inject(const ProbeCoordinate& c, const PulseParameters& p,
                          std::uint64_t trial_seed) override {
        CounterRng rng(trial_seed);
        RawObservation obs;
        obs.duration_ms = kNominalDurationMs;
        obs.output_lines.push_back("BOOT");
        obs.output_lines.push_back("MARK sentinel seq=0");

        const double prob = ground_truth_probability(field_, c, p);
        if (rng.bernoulli(prob)) {
            std::vector<std::uint8_t> image(kSentinelBytes, kSentinelPattern);
            corrupt_image(image, c, p, rng);
            const std::vector<std::uint8_t> pristine(kSentinelBytes, kSentinelPattern);
            const SentinelDiff diff = diff_sentinel(pristine, image);
            for (const BitFlipRecord& flip : diff.flips) {
                obs.output_lines.push_back(
                    "BITFLIP addr=" + detail::hex(flip.byte_offset, 3) +
                    " bit=" + detail::dec(static_cast<std::uint64_t>(flip.bit_index)) +
                    " dir=" + (flip.direction == FlipDirection::ZeroToOne ? "01" : "10"));
            }
        }
        obs.output_lines.push_back("OK");
        return obs;
    }

    NominalProfile nominal_profile() const override {
        NominalProfile profile;
        profile.expected_marks = 1;
        return profile;
    }
    const SusceptibilityField& field() const override { return field_; }

private:
    void corrupt_image(std::vector<std::uint8_t>& image, const ProbeCoordinate& c,
                       const PulseParameters& p, CounterRng& rng) const {
        // Flip count grows with the unclamped local intensity, 1..64.
        const double intensity = local_intensity(field_, c, p);
        const auto scaled = static_cast<std::int64_t>(
            std::llround(static_cast<double>(kMaxFlipsPerTrial) * intensity));
        const std::uint32_t k_max = static_cast<std::uint32_t>(
            std::clamp<std::int64_t>(scaled, 1, kMaxFlipsPerTrial));
        const std::uint32_t k = 1 + static_cast<std::uint32_t>(rng.next_below(k_max));

        // Bit positions holding 0 / 1 in the 0xA5 pattern.
        static constexpr std::array<int, 4> kZeroBits = {1, 3, 4, 6};
        static constexpr std::array<int, 4> kOneBits = {0, 2, 5, 7};
        const FlipDirection dominant =
            p.polarity == Polarity::Normal ? FlipDirection::ZeroToOne : FlipDirection::OneToZero;
        for (std::uint32_t n = 0; n < k; ++n) {
            const FlipDirection dir =
                rng.bernoulli(kPolarityBias)
                    ? dominant
                    : (dominant == FlipDirection::ZeroToOne ? FlipDirection::OneToZero
                                                            : FlipDirection::ZeroToOne);
            const auto& candidates = dir == FlipDirection::ZeroToOne ? kZeroBits : kOneBits;
            for (;;) {
                const auto offset = static_cast<std::size_t>(rng.next_below(kSentinelBytes));
                const int bit = candidates[rng.next_below(candidates.size())];
                const std::uint8_t mask = static_cast<std::uint8_t>(1u << bit);
                if ((image[offset] & mask) != (kSentinelPattern & mask)) continue;  // already flipped
                image[offset] ^= mask;
                break;
            }
        }
    }

    SusceptibilityField field_;
};

// MCU target: deterministic loop markers plus a CRC-checked sentinel block.
// A fault draw picks its outcome from the dominant hotspot's affinity.
class McuSimTarget final : public TargetBackend {
public:
    McuSimTarget(SusceptibilityField field, std::size_t loop_iterations,
                 std::uint32_t timeout_ms = kDefaultTimeoutMs)
        : field_(std::move(field)), loop_iterations_(loop_iterations), timeout_ms_(timeout_ms) {
        field_.timed = true;
        field_.validate();
        if (loop_iterations_ < 1)
            throw std::invalid_argument("McuSimTarget loop_iterations must be >= 1");
    }

    void reset() override {}

    RawObservation inject(const ProbeCoordinate& c, const PulseParameters& p,
                          std::uint64_t trial_seed) override {
        CounterRng rng(trial_seed);
        RawObservation obs;
        obs.duration_ms = kNominalDurationMs;

        const double prob = ground_truth_probability(field_, c, p);
        if (!rng.bernoulli(prob)) {
            emit_nominal(obs);
            return obs;
        }

        const Hotspot* spot = dominant_hotspot(field_, c, p);
        const FaultAffinity affinity = spot ? spot->affinity : FaultAffinity{};
        const double u = rng.next_double();
        if (u < affinity.control_flow) {
            emit_control_flow(obs, rng);
        } else if (u < affinity.control_flow + affinity.data_corruption) {
            emit_crc_error(obs, rng);
        } else {
            emit_system_level(obs, rng);
        }
        return obs;
    }

    NominalProfile nominal_profile() const override {
        NominalProfile profile;
        profile.expected_marks = loop_iterations_;
        return profile;
    }
    const SusceptibilityField& field() const override { return field_; }

private:
    void emit_marks(RawObservation& obs, std::size_t count) const {
        obs.output_lines.push_back("BOOT");
        for (std::size_t i = 0; i < count; ++i)
            obs.output_lines.push_back("MARK loop seq=" + detail::dec(i));
    }

    void emit_nominal(RawObservation& obs) const {
        emit_marks(obs, loop_iterations_);
        obs.output_lines.push_back("OK");
    }

    void emit_control_flow(RawObservation& obs, CounterRng& rng) const {
        const auto iter = static_cast<std::size_t>(rng.next_below(loop_iterations_));
        emit_marks(obs, iter);
        if (rng.bernoulli(0.5)) {
            obs.output_lines.push_back("CF_SKIP iter=" + detail::dec(iter) +
                                       " expected=" + detail::dec(loop_iterations_));
        } else {
            obs.output_lines.push_back("CF_EXIT iter=" + detail::dec(iter));
        }
        obs.output_lines.push_back("OK");
    }

    void emit_crc_error(RawObservation& obs, CounterRng& rng) const {
        emit_marks(obs, loop_iterations_);
        // Sentinel blocks are 256 bytes of the fixed pattern; the expected
        // CRC is computed, the observed one is corrupted.
        const std::vector<std::uint8_t> block(256, kSentinelPattern);
        const std::uint16_t want = crc16(block);
        std::uint16_t got = want;
        while (got == want)
            got = want ^ static_cast<std::uint16_t>(rng.next_u64() & 0xFFFF);
        obs.output_lines.push_back("CRC_ERR block=" + detail::dec(rng.next_below(4)) +
                                   " got=" + detail::hex(got, 4) +
                                   " want=" + detail::hex(want, 4));
    }

    void emit_system_level(RawObservation& obs, CounterRng& rng) const {
        const auto iter = static_cast<std::size_t>(rng.next_below(loop_iterations_));
        emit_marks(obs, iter);
        if (rng.bernoulli(0.5)) {
            obs.output_lines.push_back("RESET cause=emfi");
            obs.output_lines.push_back("BOOT");
        } else {
            obs.responded = false;  // hang: output truncated at the timeout
            obs.duration_ms = timeout_ms_;
        }
    }

    SusceptibilityField field_;
    std::size_t loop_iterations_;
    std::uint32_t timeout_ms_;
};

// Debug-probe target: breakpoints at three points of a reference program
// capture pc and a0..a5. A fault perturbs exactly one register field in one
// snapshot, or halts the core outright.
class DebugSimTarget final : public TargetBackend {
public:
    static constexpr std::size_t kSnapshots = 3;
    static constexpr std::size_t kRegisters = 7;  // pc, a0..a5

    explicit DebugSimTarget(SusceptibilityField field) : field_(std::move(field)) {
        field_.timed = true;
        field_.validate();
    }

    void reset() override {}

    static constexpr std::array<std::array<std::uint32_t, kRegisters>, kSnapshots>
        kNominalRegs = {{
            {0x40080010, 0x00000000, 0x3ffb0000, 0x00000001, 0x0000000a, 0x00000111, 0x00000000},
            {0x40080030, 0x00000001, 0x3ffb0040, 0x00000002, 0x00000014, 0x00000222, 0x00000001},
            {0x40080050, 0x00000002, 0x3ffb0080, 0x00000004, 0x0000001e, 0x00000333, 0x00000002},
        }};

    RawObservation inject(const ProbeCoordinate& c, const PulseParameters& p,
                          std::uint64_t trial_seed) override {
        CounterRng rng(trial_seed);
        RawObservation obs;
        obs.duration_ms = kNominalDurationMs;
        obs.output_lines.push_back("BOOT");

        const double prob = ground_truth_probability(field_, c, p);
        if (!rng.bernoulli(prob)) {
            for (std::size_t s = 0; s < kSnapshots; ++s)
                obs.output_lines.push_back(regs_line(s, kRegisters, 0));
            obs.output_lines.push_back("OK");
            return obs;
        }

        const Hotspot* spot = dominant_hotspot(field_, c, p);
        const FaultAffinity affinity = spot ? spot->affinity : FaultAffinity{};
        const bool halt = rng.next_double() >= affinity.control_flow + affinity.data_corruption;
        if (halt) {
            const auto upto = static_cast<std::size_t>(rng.next_below(kSnapshots));
            for (std::size_t s = 0; s < upto; ++s)
                obs.output_lines.push_back(regs_line(s, kRegisters, 0));
            const std::uint32_t pc =
                kNominalRegs[upto][0] ^ (1u << rng.next_below(32));
            obs.output_lines.push_back("HALT pc=" + detail::hex(pc, 8));
            return obs;
        }

        // Control-flow and data draws both surface as a register deviation:
        // with only breakpoint snapshots visible, a diverted path shows up
        // as a perturbed pc the same way corrupted data shows up in a0..a5.
        const auto snapshot = static_cast<std::size_t>(rng.next_below(kSnapshots));
        const auto reg = static_cast<std::size_t>(rng.next_below(kRegisters));
        const std::uint32_t bit = static_cast<std::uint32_t>(rng.next_below(32));
        for (std::size_t s = 0; s < kSnapshots; ++s)
            obs.output_lines.push_back(
                s == snapshot ? regs_line(s, reg, 1u << bit) : regs_line(s, kRegisters, 0));
        obs.output_lines.push_back("OK");
        return obs;
    }

    NominalProfile nominal_profile() const override {
        NominalProfile profile;
        profile.expected_marks = 0;
        for (std::size_t s = 0; s < kSnapshots; ++s) {
            std::vector<std::pair<std::string, std::string>> attrs;
            for (std::size_t r = 0; r < kRegisters; ++r)
                attrs.emplace_back(reg_name(r), detail::hex(kNominalRegs[s][r], 8));
            profile.expected_regs.push_back(std::move(attrs));
        }
        return profile;
    }
    const SusceptibilityField& field() const override { return field_; }

private:
    static std::string reg_name(std::size_t r) {
        return r == 0 ? std::string{"pc"} : "a" + std::to_string(r - 1);
    }

    // One REGS line; register `deviate_reg` (if < kRegisters) is xored with
    // `deviation`.
    static std::string regs_line(std::size_t snapshot, std::size_t deviate_reg,
                                 std::uint32_t deviation) {
        std::string line = "REGS";
        for (std::size_t r = 0; r < kRegisters; ++r) {
            std::uint32_t value = kNominalRegs[snapshot][r];
            if (r == deviate_reg) value ^= deviation;
            line += ' ';
            line += reg_name(r);
            line += '=';
            line += detail::hex(value, 8);
        }
        return line;
    }

    SusceptibilityField field_;
};

enum class TargetKind { SramSim, McuSim, DebugSim };

inline const char* to_string(TargetKind k) {
    switch (k) {
        case TargetKind::SramSim: return "sram_sim";
        case TargetKind::McuSim: return "mcu_sim";
        case TargetKind::DebugSim: return "debug_sim";
    }
    return "?";
}

}  // namespace emfi
