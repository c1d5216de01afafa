// Shared test utilities: session synthesis with a known injected fault
// class, independent statistical oracles, and log-comparison helpers.
// Everything here is test-only and deliberately independent of the code
// paths it checks.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "emfi/classify.hpp"
#include "emfi/protocol.hpp"
#include "emfi/rng.hpp"

namespace emfi_test {

// A raw session with the profile it should be judged against and the class
// that was injected by construction.
struct SynthesizedSession {
    std::vector<std::string> raw_lines;
    bool responded = true;
    emfi::NominalProfile profile;
    emfi::FaultClass expected = emfi::FaultClass::None;
};

inline std::string hex_value(std::uint64_t v, int digits) {
    static constexpr char d[] = "0123456789abcdef";
    std::string s;
    for (int i = digits - 1; i >= 0; --i) s += d[(v >> (4 * i)) & 0xF];
    return "0x" + s;
}

inline SynthesizedSession synthesize_session(emfi::FaultClass cls, emfi::CounterRng& rng) {
    SynthesizedSession s;
    s.expected = cls;
    const std::size_t n = 3 + rng.next_below(10);  // markers in a nominal run
    s.profile.expected_marks = n;

    const auto emit_marks = [&](std::size_t count) {
        s.raw_lines.push_back("BOOT");
        for (std::size_t i = 0; i < count; ++i)
            s.raw_lines.push_back("MARK loop seq=" + std::to_string(i));
    };

    switch (cls) {
        case emfi::FaultClass::None: {
            emit_marks(n);
            s.raw_lines.push_back("OK");
            break;
        }
        case emfi::FaultClass::ControlFlow: {
            const auto variant = rng.next_below(3);
            if (variant == 0) {
                const std::size_t iter = rng.next_below(n);
                emit_marks(iter);
                s.raw_lines.push_back("CF_SKIP iter=" + std::to_string(iter) +
                                      " expected=" + std::to_string(n));
                s.raw_lines.push_back("OK");
            } else if (variant == 1) {
                const std::size_t iter = rng.next_below(n);
                emit_marks(iter);
                s.raw_lines.push_back("CF_EXIT iter=" + std::to_string(iter));
                s.raw_lines.push_back("OK");
            } else {
                // Silent miscount: one marker missing, no CF token.
                emit_marks(n - 1);
                s.raw_lines.push_back("OK");
            }
            break;
        }
        case emfi::FaultClass::DataCorruption: {
            const auto variant = rng.next_below(3);
            if (variant == 0) {
                emit_marks(n);
                const auto want = static_cast<std::uint16_t>(rng.next_u64() & 0xFFFF);
                auto got = want;
                while (got == want) got = static_cast<std::uint16_t>(rng.next_u64() & 0xFFFF);
                s.raw_lines.push_back("CRC_ERR block=" + std::to_string(rng.next_below(4)) +
                                      " got=" + hex_value(got, 4) + " want=" + hex_value(want, 4));
            } else if (variant == 1) {
                s.profile.expected_marks = 1;
                s.raw_lines.push_back("BOOT");
                s.raw_lines.push_back("MARK sentinel seq=0");
                const std::size_t flips = 1 + rng.next_below(8);
                for (std::size_t f = 0; f < flips; ++f)
                    s.raw_lines.push_back("BITFLIP addr=" + hex_value(f * 17 + rng.next_below(16), 3) +
                                          " bit=" + std::to_string(rng.next_below(8)) +
                                          " dir=" + (rng.bernoulli(0.5) ? "01" : "10"));
                s.raw_lines.push_back("OK");
            } else {
                // Debug-style: one register field off the nominal table.
                s.profile.expected_marks = 0;
                s.profile.expected_regs.clear();
                s.raw_lines.push_back("BOOT");
                std::vector<std::vector<std::pair<std::string, std::string>>> nominal;
                for (int snap = 0; snap < 3; ++snap) {
                    std::vector<std::pair<std::string, std::string>> attrs;
                    attrs.emplace_back("pc", hex_value(0x40000000u + rng.next_below(0x10000), 8));
                    for (int r = 0; r < 4; ++r)
                        attrs.emplace_back("a" + std::to_string(r),
                                           hex_value(rng.next_below(0x100000000ull), 8));
                    nominal.push_back(attrs);
                }
                s.profile.expected_regs = nominal;
                const std::size_t bad_snap = rng.next_below(3);
                const std::size_t bad_reg = rng.next_below(5);
                for (std::size_t snap = 0; snap < 3; ++snap) {
                    std::string line = "REGS";
                    for (std::size_t r = 0; r < nominal[snap].size(); ++r) {
                        std::string value = nominal[snap][r].second;
                        if (snap == bad_snap && r == bad_reg) {
                            // flip one hex digit
                            const char c = value.back();
                            value.back() = c == 'f' ? '0' : (c == '9' ? 'a' : c + 1);
                        }
                        line += ' ' + nominal[snap][r].first + '=' + value;
                    }
                    s.raw_lines.push_back(line);
                }
                s.raw_lines.push_back("OK");
            }
            break;
        }
        case emfi::FaultClass::SystemLevel: {
            const auto variant = rng.next_below(4);
            if (variant == 0) {
                emit_marks(rng.next_below(n));
                s.responded = false;  // hang
            } else if (variant == 1) {
                emit_marks(rng.next_below(n));
                s.raw_lines.push_back("RESET cause=emfi");
                s.raw_lines.push_back("BOOT");
            } else if (variant == 2) {
                s.raw_lines.push_back("BOOT");
                s.raw_lines.push_back("HALT pc=" + hex_value(rng.next_below(0x100000000ull), 8));
            } else {
                emit_marks(n);
                // Desynchronized output: an unparseable line amid the stream.
                static const char* garbage[] = {"GLITCH?", "M@RK seq=1", "MARK SEQ=1",
                                                "ok lowercase", "\x18\x02junk"};
                s.raw_lines.push_back(garbage[rng.next_below(5)]);
                s.raw_lines.push_back("OK");
            }
            break;
        }
    }
    return s;
}

inline emfi::FaultObservation classify_synthesized(const SynthesizedSession& s) {
    const emfi::SessionParse parse = emfi::parse_session(s.raw_lines, s.responded);
    return emfi::classify_session(parse, s.profile);
}

// Central interval of Binomial(n, p) at confidence 1 - alpha: the smallest
// [lo, hi] with P(X < lo) <= alpha/2 and P(X > hi) <= alpha/2. Direct PMF
// summation in log space.
inline std::pair<std::uint64_t, std::uint64_t> binomial_central_interval(std::uint64_t n,
                                                                         double p,
                                                                         double alpha = 0.01) {
    if (p <= 0.0) return {0, 0};
    if (p >= 1.0) return {n, n};
    const double log_p = std::log(p);
    const double log_q = std::log1p(-p);
    const auto log_pmf = [&](std::uint64_t k) {
        return std::lgamma(static_cast<double>(n) + 1.0) -
               std::lgamma(static_cast<double>(k) + 1.0) -
               std::lgamma(static_cast<double>(n - k) + 1.0) +
               static_cast<double>(k) * log_p + static_cast<double>(n - k) * log_q;
    };
    std::uint64_t lo = 0;
    double cdf = 0.0;
    for (std::uint64_t k = 0; k <= n; ++k) {
        cdf += std::exp(log_pmf(k));
        if (cdf > alpha / 2.0) {
            lo = k;
            break;
        }
    }
    std::uint64_t hi = n;
    double tail = 0.0;
    for (std::uint64_t k = n;; --k) {
        tail += std::exp(log_pmf(k));
        if (tail > alpha / 2.0) {
            hi = k;
            break;
        }
        if (k == 0) break;
    }
    return {lo, hi};
}

// Log lines with the volatile timestamp removed, for determinism checks.
inline std::vector<std::string> log_lines_without_timestamps(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        j.erase("timestamp_ms");
        out.push_back(j.dump());
    }
    return out;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::filesystem::path fresh_temp_dir(const std::string& tag) {
    static std::uint64_t counter = 0;
    const auto dir = std::filesystem::temp_directory_path() /
                     ("emfi_" + tag + "_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace emfi_test
