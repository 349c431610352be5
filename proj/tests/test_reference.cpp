#include <gtest/gtest.h>

#include "support.hpp"

namespace dsvpar {
namespace {

using testing::bytes;

TEST(Oracle, QuotedFieldWithDelimiterAndNewline) {
  const auto r = sequential_parse(bytes("\"a,\nb\",c\n"), testing::csv().spec, ParseOptions{});
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0], (std::vector<std::string>{"a,\nb", "c"}));
  EXPECT_EQ(std::get<std::string>(*r.table.columns[0].data.value_at(0)), "a,\nb");
}

TEST(Oracle, DoubledQuoteStaysEscaped) {
  // The DFA marks the second quote of a pair as data; the first is control.
  const auto r = sequential_parse(bytes("\"x\"\"y\"\n"), testing::csv().spec, ParseOptions{});
  EXPECT_EQ(r.records[0][0], "x\"y");
}

TEST(Oracle, RaggedAndTrailing) {
  const auto r = sequential_parse(bytes("1,Apples\n2"), testing::csv().spec, ParseOptions{});
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.diag.column_stats.min, 1u);
  EXPECT_EQ(r.diag.column_stats.max, 2u);
  EXPECT_EQ(r.table.columns[0].schema.type, LogicalType::int64);
  EXPECT_FALSE(r.table.columns[1].data.is_valid(1));
}

TEST(Oracle, UnclosedQuoteIsInvalidAtEnd) {
  const auto r = sequential_parse(bytes("a\n\"open"), testing::csv().spec, ParseOptions{});
  EXPECT_EQ(r.diag.invalid_records, 1u);
  EXPECT_EQ(r.diag.first_invalid_offset, 7u);
  ParseOptions strict;
  strict.strict = true;
  EXPECT_THROW(sequential_parse(bytes("a\n\"open"), testing::csv().spec, strict), DataError);
}

TEST(Oracle, TotalOverArbitraryBytes) {
  testing::FuzzSource fuzz(12);
  for (int t = 0; t < 2000; ++t) {
    std::string s(fuzz.below(300), '\0');
    for (auto& c : s) c = static_cast<char>(fuzz.below(256));
    const auto in = bytes(s);
    for (auto enc : {EncodingId::ascii, EncodingId::utf8}) {
      ParseOptions opt;
      opt.encoding = enc;
      const auto r = sequential_parse(in, testing::csv().spec, opt, std::nullopt, true);
      ASSERT_EQ(r.table.rows, r.records.size());
      ASSERT_EQ(r.trace->state.size(), s.size());
      std::size_t bytes_in_fields = 0;
      for (const auto& rec : r.records) {
        for (const auto& f : rec) bytes_in_fields += f.size();
      }
      std::size_t data = 0;
      for (auto k : r.trace->klass) data += k == 0;
      ASSERT_EQ(bytes_in_fields, data);
    }
  }
}

TEST(Oracle, BoundaryStates) {
  const auto in = bytes("a,\"b,c\"\n");
  const auto st = boundary_states(in, testing::csv().spec, EncodingId::ascii, 3);
  // chunk starts at 0, 3, 6: EOR, ENC (after the opening quote), ENC
  EXPECT_EQ(st, (std::vector<StateIndex>{0, 1, 1}));
}

}  // namespace
}  // namespace dsvpar
