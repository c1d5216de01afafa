#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "emfi/protocol.hpp"
#include "emfi/rng.hpp"

using namespace emfi;

namespace {

// Independent CRC-16/CCITT-FALSE: table-driven, built at first use. The
// library implementation is a plain bit loop; agreeing on random inputs
// rules out a shared mistake.
std::uint16_t crc16_reference(const std::vector<std::uint8_t>& data) {
    static const auto table = [] {
        std::array<std::uint16_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint16_t crc = static_cast<std::uint16_t>(i << 8);
            for (int bit = 0; bit < 8; ++bit)
                crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021)
                                     : static_cast<std::uint16_t>(crc << 1);
            t[i] = crc;
        }
        return t;
    }();
    std::uint16_t crc = 0xFFFF;
    for (std::uint8_t b : data)
        crc = static_cast<std::uint16_t>((crc << 8) ^ table[((crc >> 8) ^ b) & 0xFF]);
    return crc;
}

// Naive per-bit double loop, for cross-checking diff_sentinel.
std::vector<BitFlipRecord> diff_bruteforce(const std::vector<std::uint8_t>& expected,
                                           const std::vector<std::uint8_t>& actual) {
    std::vector<BitFlipRecord> flips;
    for (std::size_t i = 0; i < expected.size(); ++i)
        for (int bit = 0; bit < 8; ++bit) {
            const bool e = expected[i] & (1u << bit);
            const bool a = actual[i] & (1u << bit);
            if (e != a)
                flips.push_back({i, bit, e ? FlipDirection::OneToZero : FlipDirection::ZeroToOne});
        }
    return flips;
}

ProtocolLine random_line(CounterRng& rng) {
    static constexpr Token tokens[] = {Token::Boot,   Token::Mark,   Token::Regs, Token::BitFlip,
                                       Token::CfSkip, Token::CfExit, Token::CrcErr, Token::Reset,
                                       Token::Halt,   Token::Ok};
    ProtocolLine line;
    line.token = tokens[rng.next_below(10)];
    const auto attr_count = rng.next_below(4);
    for (std::uint64_t a = 0; a < attr_count; ++a) {
        std::string key;
        key += static_cast<char>('a' + rng.next_below(26));
        const auto key_len = rng.next_below(6);
        for (std::uint64_t i = 0; i < key_len; ++i) {
            static constexpr char chars[] = "abcdefghijklmnopqrstuvwxyz0123456789_";
            key += chars[rng.next_below(sizeof(chars) - 1)];
        }
        std::string value;
        if (rng.bernoulli(0.75)) {  // tag attributes have no value
            const auto value_len = 1 + rng.next_below(8);
            for (std::uint64_t i = 0; i < value_len; ++i)
                value += static_cast<char>(0x21 + rng.next_below(0x7E - 0x21));
        }
        line.attrs.emplace_back(key, value);
    }
    return line;
}

}  // namespace

TEST_CASE("bare token parses with no attributes") {
    const auto r = parse_line("OK");
    REQUIRE(r.ok);
    CHECK(r.line.token == Token::Ok);
    CHECK(r.line.attrs.empty());
}

TEST_CASE("CF_SKIP with attributes parses in order") {
    const auto r = parse_line("CF_SKIP iter=7 expected=10");
    REQUIRE(r.ok);
    CHECK(r.line.token == Token::CfSkip);
    REQUIRE(r.line.attrs.size() == 2);
    CHECK(r.line.attrs[0] == std::pair<std::string, std::string>{"iter", "7"});
    CHECK(r.line.attrs[1] == std::pair<std::string, std::string>{"expected", "10"});
}

TEST_CASE("marker lines with tag attributes parse") {
    const auto r = parse_line("MARK sentinel seq=0");
    REQUIRE(r.ok);
    CHECK(r.line.token == Token::Mark);
    REQUIRE(r.line.attrs.size() == 2);
    CHECK(r.line.attrs[0] == std::pair<std::string, std::string>{"sentinel", ""});
    CHECK(r.line.attrs[1] == std::pair<std::string, std::string>{"seq", "0"});
    CHECK(serialize(r.line) == "MARK sentinel seq=0\n");
}

TEST_CASE("unknown token is rejected at byte 0") {
    const auto r = parse_line("GLITCH?");
    REQUIRE_FALSE(r.ok);
    CHECK(r.error.kind == ParseErrorKind::UnknownToken);
    CHECK(r.error.byte_pos == 0);
}

TEST_CASE("empty line is an unknown token") {
    const auto r = parse_line("");
    REQUIRE_FALSE(r.ok);
    CHECK(r.error.kind == ParseErrorKind::UnknownToken);
}

TEST_CASE("non-ascii bytes are rejected with their position") {
    std::string raw = "OK x=1";
    raw[3] = static_cast<char>(0xFF);
    const auto r = parse_line(raw);
    REQUIRE_FALSE(r.ok);
    CHECK(r.error.kind == ParseErrorKind::NonAscii);
    CHECK(r.error.byte_pos == 3);
}

TEST_CASE("malformed attributes carry the byte position") {
    SECTION("key starting with a digit") {
        const auto r = parse_line("MARK 5bad=1");
        REQUIRE_FALSE(r.ok);
        CHECK(r.error.kind == ParseErrorKind::MalformedAttribute);
        CHECK(r.error.byte_pos == 5);
    }
    SECTION("upper-case key") {
        const auto r = parse_line("MARK SEQ=1");
        REQUIRE_FALSE(r.ok);
        CHECK(r.error.kind == ParseErrorKind::MalformedAttribute);
    }
    SECTION("empty value after equals") {
        const auto r = parse_line("MARK seq=");
        REQUIRE_FALSE(r.ok);
        CHECK(r.error.kind == ParseErrorKind::MalformedAttribute);
        CHECK(r.error.byte_pos == 9);
    }
    SECTION("double space between attributes") {
        const auto r = parse_line("MARK seq=1  x=2");
        REQUIRE_FALSE(r.ok);
        CHECK(r.error.kind == ParseErrorKind::MalformedAttribute);
    }
}

TEST_CASE("parse_session separates well-formed and malformed lines") {
    SECTION("hang with no output") {
        const std::vector<std::string> lines;
        const auto s = parse_session(lines, false);
        CHECK(s.hang);
        CHECK(s.lines.empty());
        CHECK(s.malformed.empty());
    }
    SECTION("three valid lines") {
        const std::vector<std::string> lines{"BOOT", "MARK loop seq=0", "OK"};
        const auto s = parse_session(lines, true);
        CHECK_FALSE(s.hang);
        CHECK(s.lines.size() == 3);
        CHECK(s.malformed.empty());
    }
    SECTION("garbage line is collected, not dropped") {
        const std::vector<std::string> lines{"BOOT", "?!garbage", "OK"};
        const auto s = parse_session(lines, true);
        CHECK(s.lines.size() == 2);
        REQUIRE(s.malformed.size() == 1);
        CHECK(s.malformed[0].line_index == 1);
        CHECK(s.raw_index == std::vector<std::size_t>{0, 2});
    }
}

TEST_CASE("serialization round-trips for generated lines") {
    CounterRng rng(1234);
    for (int i = 0; i < 1000; ++i) {
        const ProtocolLine line = random_line(rng);
        const std::string wire = serialize(line);
        REQUIRE(wire.back() == '\n');
        const auto parsed = parse_line(std::string_view{wire}.substr(0, wire.size() - 1));
        REQUIRE(parsed.ok);
        CHECK(parsed.line == line);
    }
}

TEST_CASE("crc16 matches the published check values") {
    CHECK(crc16({}) == 0xFFFF);
    const std::string check = "123456789";
    std::vector<std::uint8_t> bytes(check.begin(), check.end());
    CHECK(crc16(bytes) == 0x29B1);
    const std::vector<std::uint8_t> zero{0x00};
    CHECK(crc16(zero) == 0xE1F0);
}

TEST_CASE("crc16 agrees with the table-driven reference on random inputs") {
    CounterRng rng(555);
    for (int i = 0; i < 1000; ++i) {
        std::vector<std::uint8_t> data(rng.next_below(64));
        for (auto& b : data) b = static_cast<std::uint8_t>(rng.next_below(256));
        CHECK(crc16(data) == crc16_reference(data));
    }
}

TEST_CASE("diff_sentinel basics") {
    SECTION("identical images diff empty") {
        const std::vector<std::uint8_t> img(16, 0xA5);
        CHECK(diff_sentinel(img, img).flips.empty());
    }
    SECTION("single bit flip is located and directed") {
        std::vector<std::uint8_t> expected(8, 0xFF);
        std::vector<std::uint8_t> actual = expected;
        actual[3] = 0xFD;
        const auto diff = diff_sentinel(expected, actual);
        REQUIRE(diff.flips.size() == 1);
        CHECK(diff.flips[0] == BitFlipRecord{3, 1, FlipDirection::OneToZero});
    }
    SECTION("length mismatch is a domain error") {
        const std::vector<std::uint8_t> a(4), b(5);
        CHECK_THROWS_AS(diff_sentinel(a, b), std::domain_error);
    }
}

TEST_CASE("diff_sentinel equals the naive per-bit oracle on random images") {
    CounterRng rng(808);
    for (int i = 0; i < 200; ++i) {
        std::vector<std::uint8_t> a(64), b(64);
        for (auto& byte : a) byte = static_cast<std::uint8_t>(rng.next_below(256));
        for (std::size_t j = 0; j < b.size(); ++j)
            b[j] = rng.bernoulli(0.7) ? a[j] : static_cast<std::uint8_t>(rng.next_below(256));
        const auto diff = diff_sentinel(a, b);
        CHECK(diff.flips == diff_bruteforce(a, b));
        // sortedness by (offset, bit)
        for (std::size_t k = 1; k < diff.flips.size(); ++k) {
            const auto& prev = diff.flips[k - 1];
            const auto& cur = diff.flips[k];
            CHECK((prev.byte_offset < cur.byte_offset ||
                   (prev.byte_offset == cur.byte_offset && prev.bit_index < cur.bit_index)));
        }
    }
}

TEST_CASE("diff_sentinel is antisymmetric") {
    CounterRng rng(909);
    for (int i = 0; i < 100; ++i) {
        std::vector<std::uint8_t> a(32), b(32);
        for (auto& byte : a) byte = static_cast<std::uint8_t>(rng.next_below(256));
        for (auto& byte : b) byte = static_cast<std::uint8_t>(rng.next_below(256));
        const auto ab = diff_sentinel(a, b);
        const auto ba = diff_sentinel(b, a);
        REQUIRE(ab.flips.size() == ba.flips.size());
        for (std::size_t k = 0; k < ab.flips.size(); ++k) {
            CHECK(ab.flips[k].byte_offset == ba.flips[k].byte_offset);
            CHECK(ab.flips[k].bit_index == ba.flips[k].bit_index);
            CHECK(ab.flips[k].direction != ba.flips[k].direction);
        }
    }
}
