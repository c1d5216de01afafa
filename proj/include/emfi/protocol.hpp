// Line-oriented instrumentation protocol between a target and the host.
//
// This is the compatibility contract for any backend, simulated or real.
// Each line is ASCII and consists of an upper-case token followed by zero or
// more space-separated attributes:
//
//     line   := token (" " attr)*
//     token  := "BOOT" | "MARK" | "REGS" | "BITFLIP" | "CF_SKIP" | "CF_EXIT"
//             | "CRC_ERR" | "RESET" | "HALT" | "OK"
//     attr   := key ("=" value)?
//     key    := [a-z] [a-z0-9_]*
//     value  := one or more printable ASCII characters excluding space
//
// A bare key is a tag attribute (it parses with an empty value), used by
// marker lines such as "MARK sentinel seq=0". Serialization appends a
// single "\n"; parse(serialize(x)) == x for every representable line.
// Anything else is a parse error carrying the byte position, and malformed
// lines are evidence for classification rather than failures: a
// desynchronized UART shows up exactly this way.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace emfi {

enum class Token {
    Boot,
    Mark,
    Regs,
    BitFlip,
    CfSkip,
    CfExit,
    CrcErr,
    Reset,
    Halt,
    Ok,
};

inline constexpr std::array<std::pair<std::string_view, Token>, 10> kTokenTable = {{
    {"BOOT", Token::Boot},
    {"MARK", Token::Mark},
    {"REGS", Token::Regs},
    {"BITFLIP", Token::BitFlip},
    {"CF_SKIP", Token::CfSkip},
    {"CF_EXIT", Token::CfExit},
    {"CRC_ERR", Token::CrcErr},
    {"RESET", Token::Reset},
    {"HALT", Token::Halt},
    {"OK", Token::Ok},
}};

inline std::string_view to_string(Token t) {
    for (const auto& [name, tok] : kTokenTable)
        if (tok == t) return name;
    return "?";
}

struct ProtocolLine {
    Token token = Token::Ok;
    std::vector<std::pair<std::string, std::string>> attrs;  // ordered key=value pairs

    std::optional<std::string_view> attr(std::string_view key) const {
        for (const auto& [k, v] : attrs)
            if (k == key) return std::string_view{v};
        return std::nullopt;
    }

    friend bool operator==(const ProtocolLine&, const ProtocolLine&) = default;
};

inline std::string serialize(const ProtocolLine& line) {
    std::string out{to_string(line.token)};
    for (const auto& [k, v] : line.attrs) {
        out += ' ';
        out += k;
        if (!v.empty()) {
            out += '=';
            out += v;
        }
    }
    out += '\n';
    return out;
}

enum class ParseErrorKind { UnknownToken, MalformedAttribute, NonAscii };

struct ParseError {
    ParseErrorKind kind = ParseErrorKind::UnknownToken;
    std::size_t byte_pos = 0;    // offset within the raw line
    std::size_t line_index = 0;  // filled by parse_session
    std::string message;
};

struct LineParseResult {
    bool ok = false;
    ProtocolLine line;
    ParseError error;
};

namespace detail {

inline bool is_key_start(char c) { return c >= 'a' && c <= 'z'; }
inline bool is_key_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}
inline bool is_value_char(char c) { return c > 0x20 && c < 0x7F; }

}  // namespace detail

// Parses one raw line (without the trailing newline).
inline LineParseResult parse_line(std::string_view raw) {
    LineParseResult r;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (static_cast<unsigned char>(raw[i]) > 0x7F) {
            r.error = {ParseErrorKind::NonAscii, i, 0, "non-ASCII byte"};
            return r;
        }
    }
    const std::size_t token_end = raw.find(' ');
    const std::string_view token_text =
        token_end == std::string_view::npos ? raw : raw.substr(0, token_end);
    std::optional<Token> token;
    for (const auto& [name, tok] : kTokenTable)
        if (name == token_text) token = tok;
    if (!token) {
        r.error = {ParseErrorKind::UnknownToken, 0, 0,
                   "unknown token \"" + std::string{token_text} + "\""};
        return r;
    }
    r.line.token = *token;

    std::size_t pos = token_text.size();
    while (pos < raw.size()) {
        // Exactly one space separates fields.
        if (raw[pos] != ' ' || pos + 1 >= raw.size() || raw[pos + 1] == ' ') {
            r.error = {ParseErrorKind::MalformedAttribute, pos, 0, "expected \" key=value\""};
            return r;
        }
        const std::size_t attr_start = pos + 1;
        std::size_t cur = attr_start;
        if (!detail::is_key_start(raw[cur])) {
            r.error = {ParseErrorKind::MalformedAttribute, cur, 0, "attribute key must start [a-z]"};
            return r;
        }
        while (cur < raw.size() && detail::is_key_char(raw[cur])) ++cur;
        const std::string key{raw.substr(attr_start, cur - attr_start)};
        if (cur == raw.size() || raw[cur] == ' ') {
            r.line.attrs.emplace_back(key, std::string{});  // tag attribute
            pos = cur;
            continue;
        }
        if (raw[cur] != '=') {
            r.error = {ParseErrorKind::MalformedAttribute, cur, 0, "expected '=' or end of key"};
            return r;
        }
        ++cur;  // consume '='
        const std::size_t value_start = cur;
        while (cur < raw.size() && detail::is_value_char(raw[cur])) ++cur;
        if (cur == value_start) {
            r.error = {ParseErrorKind::MalformedAttribute, value_start, 0, "empty attribute value"};
            return r;
        }
        if (cur < raw.size() && raw[cur] != ' ') {
            r.error = {ParseErrorKind::MalformedAttribute, cur, 0, "invalid character in value"};
            return r;
        }
        r.line.attrs.emplace_back(key, std::string{raw.substr(value_start, cur - value_start)});
        pos = cur;
    }
    r.ok = true;
    return r;
}

struct SessionParse {
    std::vector<ProtocolLine> lines;     // well-formed lines, session order
    std::vector<std::size_t> raw_index;  // raw_index[i]: position of lines[i] in the raw session
    std::vector<ParseError> malformed;   // collected, never dropped
    bool hang = false;
};

inline SessionParse parse_session(std::span<const std::string> raw_lines, bool responded) {
    SessionParse s;
    s.hang = !responded;
    for (std::size_t i = 0; i < raw_lines.size(); ++i) {
        LineParseResult r = parse_line(raw_lines[i]);
        if (r.ok) {
            s.lines.push_back(std::move(r.line));
            s.raw_index.push_back(i);
        } else {
            r.error.line_index = i;
            s.malformed.push_back(std::move(r.error));
        }
    }
    return s;
}

// CRC-16/CCITT-FALSE: polynomial 0x1021, init 0xFFFF, no reflection, no
// final xor. Check value: crc16 of "123456789" is 0x29B1.
inline std::uint16_t crc16(std::span<const std::uint8_t> data) {
    std::uint16_t crc = 0xFFFF;
    for (std::uint8_t byte : data) {
        crc ^= static_cast<std::uint16_t>(byte) << 8;
        for (int bit = 0; bit < 8; ++bit)
            crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021)
                                 : static_cast<std::uint16_t>(crc << 1);
    }
    return crc;
}

enum class FlipDirection { ZeroToOne, OneToZero };

struct BitFlipRecord {
    std::size_t byte_offset = 0;
    int bit_index = 0;  // 0..7, LSB first
    FlipDirection direction = FlipDirection::ZeroToOne;

    friend bool operator==(const BitFlipRecord&, const BitFlipRecord&) = default;
};

struct SentinelDiff {
    std::vector<BitFlipRecord> flips;  // sorted by (byte_offset, bit_index)
};

// Enumerates every differing bit between the expected and actual images,
// direction taken expected -> actual.
inline SentinelDiff diff_sentinel(std::span<const std::uint8_t> expected,
                                  std::span<const std::uint8_t> actual) {
    if (expected.size() != actual.size())
        throw std::domain_error("diff_sentinel: image lengths differ");
    SentinelDiff diff;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const std::uint8_t delta = expected[i] ^ actual[i];
        if (delta == 0) continue;
        for (int bit = 0; bit < 8; ++bit) {
            if (!(delta & (1u << bit))) continue;
            const bool was_zero = !(expected[i] & (1u << bit));
            diff.flips.push_back(
                {i, bit, was_zero ? FlipDirection::ZeroToOne : FlipDirection::OneToZero});
        }
    }
    return diff;
}

}  // namespace emfi
