// Three-tier fault taxonomy and per-coordinate aggregation.
//
// Classification priority when evidence co-occurs is SystemLevel >
// DataCorruption > ControlFlow > None: a system-level fault compromises the
// observability channel itself, so anything it reports downstream is
// suspect. The rule is fixed here so labels are reproducible.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "emfi/geometry.hpp"
#include "emfi/protocol.hpp"

namespace emfi {

enum class FaultClass { None, ControlFlow, DataCorruption, SystemLevel };

inline const char* to_string(FaultClass c) {
    switch (c) {
        case FaultClass::None: return "None";
        case FaultClass::ControlFlow: return "ControlFlow";
        case FaultClass::DataCorruption: return "DataCorruption";
        case FaultClass::SystemLevel: return "SystemLevel";
    }
    return "?";
}

enum class FaultDetail {
    None,
    // ControlFlow
    Skip,
    EarlyExit,
    LoopCountMismatch,
    // DataCorruption
    CrcMismatch,
    BitFlips,
    RegisterDeviation,
    // SystemLevel
    Hang,
    Reset,
    Halt,
    MalformedOutput,
};

inline const char* to_string(FaultDetail d) {
    switch (d) {
        case FaultDetail::None: return "None";
        case FaultDetail::Skip: return "Skip";
        case FaultDetail::EarlyExit: return "EarlyExit";
        case FaultDetail::LoopCountMismatch: return "LoopCountMismatch";
        case FaultDetail::CrcMismatch: return "CrcMismatch";
        case FaultDetail::BitFlips: return "BitFlips";
        case FaultDetail::RegisterDeviation: return "RegisterDeviation";
        case FaultDetail::Hang: return "Hang";
        case FaultDetail::Reset: return "Reset";
        case FaultDetail::Halt: return "Halt";
        case FaultDetail::MalformedOutput: return "MalformedOutput";
    }
    return "?";
}

inline FaultClass fault_class_of(FaultDetail d) {
    switch (d) {
        case FaultDetail::None: return FaultClass::None;
        case FaultDetail::Skip:
        case FaultDetail::EarlyExit:
        case FaultDetail::LoopCountMismatch: return FaultClass::ControlFlow;
        case FaultDetail::CrcMismatch:
        case FaultDetail::BitFlips:
        case FaultDetail::RegisterDeviation: return FaultClass::DataCorruption;
        case FaultDetail::Hang:
        case FaultDetail::Reset:
        case FaultDetail::Halt:
        case FaultDetail::MalformedOutput: return FaultClass::SystemLevel;
    }
    return FaultClass::None;
}

struct FaultObservation {
    FaultClass cls = FaultClass::None;
    FaultDetail detail = FaultDetail::None;
    std::vector<std::size_t> evidence;   // raw line indices supporting the verdict
    std::uint32_t bit_flip_count = 0;    // BITFLIP lines seen (BitFlips detail payload)
    std::uint32_t flips_zero_to_one = 0;
    std::uint32_t flips_one_to_zero = 0;

    friend bool operator==(const FaultObservation&, const FaultObservation&) = default;
};

// Per-trial error magnitude: bit-flip count where flips are enumerable,
// otherwise 1 for any fault and 0 for a clean run.
inline std::uint32_t error_count(const FaultObservation& obs) {
    if (obs.detail == FaultDetail::BitFlips) return obs.bit_flip_count;
    return obs.cls == FaultClass::None ? 0u : 1u;
}

// Fault-free output shape of a target: how many MARK lines a clean run
// emits, and (for debug-class targets) the exact REGS snapshots expected.
struct NominalProfile {
    std::size_t expected_marks = 0;
    // expected_regs[i]: attribute list of the i-th REGS line in a clean run.
    std::vector<std::vector<std::pair<std::string, std::string>>> expected_regs;
};

inline FaultObservation classify_session(const SessionParse& session,
                                         const NominalProfile& nominal) {
    FaultObservation obs;

    // SystemLevel: hang, RESET, HALT, or any malformed line.
    if (session.hang) {
        obs.cls = FaultClass::SystemLevel;
        obs.detail = FaultDetail::Hang;
        return obs;
    }
    {
        std::vector<std::pair<std::size_t, FaultDetail>> hits;
        for (std::size_t i = 0; i < session.lines.size(); ++i) {
            if (session.lines[i].token == Token::Reset)
                hits.emplace_back(session.raw_index[i], FaultDetail::Reset);
            else if (session.lines[i].token == Token::Halt)
                hits.emplace_back(session.raw_index[i], FaultDetail::Halt);
        }
        for (const ParseError& e : session.malformed)
            hits.emplace_back(e.line_index, FaultDetail::MalformedOutput);
        if (!hits.empty()) {
            std::sort(hits.begin(), hits.end());
            obs.cls = FaultClass::SystemLevel;
            obs.detail = hits.front().second;
            for (const auto& [idx, _] : hits) obs.evidence.push_back(idx);
            return obs;
        }
    }

    // DataCorruption: CRC_ERR, BITFLIP, or a REGS snapshot that deviates
    // from the nominal table.
    {
        std::vector<std::size_t> crc, flips, regs;
        std::size_t regs_seen = 0;
        for (std::size_t i = 0; i < session.lines.size(); ++i) {
            const ProtocolLine& line = session.lines[i];
            switch (line.token) {
                case Token::CrcErr:
                    crc.push_back(session.raw_index[i]);
                    break;
                case Token::BitFlip: {
                    flips.push_back(session.raw_index[i]);
                    ++obs.bit_flip_count;
                    const auto dir = line.attr("dir");
                    if (dir == "01") ++obs.flips_zero_to_one;
                    else if (dir == "10") ++obs.flips_one_to_zero;
                    break;
                }
                case Token::Regs: {
                    const bool deviates = regs_seen >= nominal.expected_regs.size() ||
                                          line.attrs != nominal.expected_regs[regs_seen];
                    if (deviates) regs.push_back(session.raw_index[i]);
                    ++regs_seen;
                    break;
                }
                default:
                    break;
            }
        }
        if (!crc.empty() || !flips.empty() || !regs.empty()) {
            obs.cls = FaultClass::DataCorruption;
            obs.detail = !crc.empty()    ? FaultDetail::CrcMismatch
                         : !flips.empty() ? FaultDetail::BitFlips
                                          : FaultDetail::RegisterDeviation;
            obs.evidence.insert(obs.evidence.end(), crc.begin(), crc.end());
            obs.evidence.insert(obs.evidence.end(), flips.begin(), flips.end());
            obs.evidence.insert(obs.evidence.end(), regs.begin(), regs.end());
            std::sort(obs.evidence.begin(), obs.evidence.end());
            return obs;
        }
    }

    // ControlFlow: explicit CF tokens, or a MARK count off the nominal one.
    {
        std::vector<std::size_t> skips, exits, marks;
        for (std::size_t i = 0; i < session.lines.size(); ++i) {
            switch (session.lines[i].token) {
                case Token::CfSkip: skips.push_back(session.raw_index[i]); break;
                case Token::CfExit: exits.push_back(session.raw_index[i]); break;
                case Token::Mark: marks.push_back(session.raw_index[i]); break;
                default: break;
            }
        }
        if (!skips.empty() || !exits.empty() || marks.size() != nominal.expected_marks) {
            obs.cls = FaultClass::ControlFlow;
            if (!skips.empty()) {
                obs.detail = FaultDetail::Skip;
                obs.evidence = skips;
                obs.evidence.insert(obs.evidence.end(), exits.begin(), exits.end());
                std::sort(obs.evidence.begin(), obs.evidence.end());
            } else if (!exits.empty()) {
                obs.detail = FaultDetail::EarlyExit;
                obs.evidence = exits;
            } else {
                obs.detail = FaultDetail::LoopCountMismatch;
                obs.evidence = marks;
                if (obs.evidence.empty())  // no markers at all: cite the whole session
                    for (std::size_t i = 0; i < session.raw_index.size(); ++i)
                        obs.evidence.push_back(session.raw_index[i]);
            }
            return obs;
        }
    }

    return obs;  // None
}

struct WilsonInterval {
    double low = 0.0;
    double high = 1.0;
};

// Wilson score interval for a binomial proportion; z = 1.96 gives the 95%
// interval used in CoordinateStats. Well behaved at rates 0 and 1.
inline WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t trials,
                                      double z = 1.96) {
    if (trials == 0) return {0.0, 1.0};
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

struct CoordinateStats {
    ProbeCoordinate coordinate;
    std::uint64_t trials = 0;
    std::uint64_t count_none = 0;
    std::uint64_t count_control_flow = 0;
    std::uint64_t count_data_corruption = 0;
    std::uint64_t count_system_level = 0;
    double fault_rate = 0.0;
    double wilson_low = 0.0;
    double wilson_high = 0.0;
    std::uint64_t flips_zero_to_one = 0;
    std::uint64_t flips_one_to_zero = 0;
    std::uint64_t error_count_total = 0;

    std::uint64_t fault_count() const { return trials - count_none; }
};

inline void finalize_stats(CoordinateStats& s) {
    s.fault_rate = s.trials == 0 ? 0.0
                                 : static_cast<double>(s.fault_count()) /
                                       static_cast<double>(s.trials);
    const WilsonInterval w = wilson_interval(s.fault_count(), s.trials);
    s.wilson_low = w.low;
    s.wilson_high = w.high;
}

// Groups observations by exact coordinate; output sorted by (y, x, z).
inline std::vector<CoordinateStats> aggregate_coordinate_stats(
    std::span<const std::pair<ProbeCoordinate, FaultObservation>> observations) {
    std::map<std::tuple<double, double, double>, CoordinateStats> groups;
    for (const auto& [coord, obs] : observations) {
        CoordinateStats& s = groups[{coord.y, coord.x, coord.z}];
        s.coordinate = coord;
        ++s.trials;
        switch (obs.cls) {
            case FaultClass::None: ++s.count_none; break;
            case FaultClass::ControlFlow: ++s.count_control_flow; break;
            case FaultClass::DataCorruption: ++s.count_data_corruption; break;
            case FaultClass::SystemLevel: ++s.count_system_level; break;
        }
        s.flips_zero_to_one += obs.flips_zero_to_one;
        s.flips_one_to_zero += obs.flips_one_to_zero;
        s.error_count_total += error_count(obs);
    }
    std::vector<CoordinateStats> out;
    out.reserve(groups.size());
    for (auto& [_, s] : groups) {
        finalize_stats(s);
        out.push_back(std::move(s));
    }
    return out;
}

enum class DominantDirection { ZeroToOne, OneToZero, Balanced };

inline const char* to_string(DominantDirection d) {
    switch (d) {
        case DominantDirection::ZeroToOne: return "ZeroToOne";
        case DominantDirection::OneToZero: return "OneToZero";
        case DominantDirection::Balanced: return "Balanced";
    }
    return "?";
}

inline DominantDirection dominant_flip_direction(const CoordinateStats& stats) {
    if (stats.flips_zero_to_one > stats.flips_one_to_zero) return DominantDirection::ZeroToOne;
    if (stats.flips_one_to_zero > stats.flips_zero_to_one) return DominantDirection::OneToZero;
    return DominantDirection::Balanced;
}

}  // namespace emfi
