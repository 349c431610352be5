#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

namespace dsvpar {
namespace {

TEST(NullByte, Examples) {
  EXPECT_EQ(h_nullbyte(0x50000E26u), 0x00800000u);
  EXPECT_EQ(h_nullbyte(0x00000000u), 0x80808080u);
  EXPECT_EQ(h_nullbyte(0x01010101u), 0x00000000u);
  EXPECT_EQ(bfind(0x00800000u), 23u);
  EXPECT_EQ(bfind(0x00800000u) >> 3, 2u);
  EXPECT_EQ(bfind(0) >> 3, SymbolMatcher::kNoMatch);
}

// Words built by XORing a replicated symbol against four distinct bytes have
// at most one zero lane; H must flag exactly that lane as the lowest flag.
TEST(NullByte, FlagsTheZeroLaneOfDistinctXors) {
  for (std::uint32_t lane = 0; lane < 4; ++lane) {
    for (std::uint32_t v = 0; v < 256; ++v) {
      for (std::uint32_t fill : {0x01u, 0x7Fu, 0x80u, 0xFFu}) {
        std::uint32_t w = 0;
        for (std::uint32_t l = 0; l < 4; ++l) w |= (l == lane ? v : fill) << (8 * l);
        const std::uint32_t h = h_nullbyte(w);
        if (v == 0) {
          ASSERT_NE(h & (0x80u << (8 * lane)), 0u);
          ASSERT_EQ(h & ((0x80u << (8 * lane)) - 1), 0u) << std::hex << w;
        } else if (fill != 0) {
          ASSERT_EQ(h, 0u) << std::hex << w;
        }
      }
    }
  }
}

TEST(Matcher, FiveSymbolLookup) {
  const std::uint8_t bytes[] = {'\n', '"', ',', '|', '\t'};
  const GroupIndex groups[] = {0, 1, 2, 3, 4};
  const SymbolMatcher m(bytes, groups, 5);
  ASSERT_TRUE(m.uses_swar());
  EXPECT_EQ(m.low_word(), 0x7C2C220Au);
  EXPECT_EQ(m.low_word() ^ (0x2Cu * 0x01010101u), 0x50000E26u);
  EXPECT_EQ(m.match_position(','), 2u);
  EXPECT_EQ(m.match(','), 2);
  EXPECT_EQ(m.match_position('\t'), 4u);
  EXPECT_EQ(m.catchall_position(), 5u);
  EXPECT_EQ(m.match_position('x'), 5u);
  EXPECT_EQ(m.match('x'), 5);
}

TEST(Matcher, SingleByte) {
  const std::uint8_t bytes[] = {'\n'};
  const GroupIndex groups[] = {0};
  const SymbolMatcher m(bytes, groups, 1);
  EXPECT_EQ(m.match_position('\n'), 0u);
  EXPECT_EQ(m.match('a'), 1);
}

TEST(Matcher, RejectsDuplicates) {
  const std::uint8_t bytes[] = {'a', 'a'};
  const GroupIndex groups[] = {0, 1};
  EXPECT_THROW(SymbolMatcher(bytes, groups, 2), ConfigError);
}

GroupIndex naive(const std::vector<std::uint8_t>& bytes, const std::vector<GroupIndex>& groups, GroupIndex catch_all,
                 std::uint8_t b) {
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (bytes[i] == b) return groups[i];
  }
  return catch_all;
}

TEST(Matcher, EquivalentToLinearScan) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t n = 1 + rng() % 12;  // beyond 8 exercises the table fallback
    std::vector<std::uint8_t> all(256);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    // Bias towards bytes that stress borrow propagation.
    if (trial % 3 == 0) {
      for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<std::uint8_t>(i % 2 ? 0x01 + i : 0x80 + i);
    }
    std::vector<std::uint8_t> bytes(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
    std::vector<GroupIndex> groups(n);
    for (auto& g : groups) g = static_cast<GroupIndex>(rng() % 5);
    const SymbolMatcher m(bytes, groups, 5);
    EXPECT_EQ(m.uses_swar(), n <= 8);
    for (int b = 0; b < 256; ++b) {
      ASSERT_EQ(m.match(static_cast<std::uint8_t>(b)), naive(bytes, groups, 5, static_cast<std::uint8_t>(b)))
          << "trial " << trial << " byte " << b;
    }
  }
}

TEST(Matcher, ZeroByteCandidate) {
  const std::uint8_t bytes[] = {0x00, 0x01, 0x02};
  const GroupIndex groups[] = {0, 1, 2};
  const SymbolMatcher m(bytes, groups, 3);
  for (int b = 0; b < 256; ++b) EXPECT_EQ(m.match(static_cast<std::uint8_t>(b)), b < 3 ? b : 3);
}

TEST(Matcher, ForSpecAgreesWithGroupOf) {
  const auto spec = build_csv_dialect('|', '\'', '\r');
  const auto m = SymbolMatcher::for_spec(spec);
  for (int b = 0; b < 256; ++b) EXPECT_EQ(m.match(static_cast<std::uint8_t>(b)), spec.group_of(static_cast<std::uint8_t>(b)));
}

}  // namespace
}  // namespace dsvpar
