#include <gtest/gtest.h>

#include "support.hpp"

namespace dsvpar {
namespace {

Table sample() {
  Table t;
  t.rows = 10;
  const LogicalType types[] = {LogicalType::boolean, LogicalType::int64, LogicalType::float64,
                               LogicalType::date,    LogicalType::timestamp, LogicalType::utf8};
  int k = 0;
  for (auto type : types) {
    ColumnBuilder b(type);
    for (int r = 0; r < 10; ++r) {
      if ((r + k) % 4 == 0) {
        b.append_null();
        continue;
      }
      switch (type) {
        case LogicalType::boolean: b.append(Value{r % 2 == 0}); break;
        case LogicalType::int64: b.append(Value{std::int64_t{r} * -1000}); break;
        case LogicalType::float64: b.append(Value{r / 8.0}); break;
        case LogicalType::date: b.append(Value{Date{r * 400}}); break;
        case LogicalType::timestamp: b.append(Value{Timestamp{r * 1234567LL}}); break;
        case LogicalType::utf8: b.append(Value{std::string(static_cast<std::size_t>(r), 'z') + "\"," }); break;
      }
    }
    t.columns.push_back({ColumnSchema{"c" + std::to_string(k), type, true, std::nullopt, {}}, std::move(b).finish()});
    ++k;
  }
  return t;
}

TEST(Container, RoundTrip) {
  const Table t = sample();
  const std::string bytes = to_container(t);
  EXPECT_EQ(bytes.substr(0, 4), "PPRW");
  const Table back = read_container({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
  ASSERT_EQ(back.rows, t.rows);
  ASSERT_EQ(back.columns.size(), t.columns.size());
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    EXPECT_EQ(back.columns[c].schema.name, t.columns[c].schema.name);
    EXPECT_EQ(back.columns[c].schema.type, t.columns[c].schema.type);
    EXPECT_EQ(back.columns[c].data, t.columns[c].data);
  }
  EXPECT_EQ(to_container(back), bytes);
}

TEST(Container, Layout) {
  Table t;
  t.rows = 0;
  const std::string bytes = to_container(t);
  ASSERT_GE(bytes.size(), 10u);
  EXPECT_EQ(static_cast<std::uint8_t>(bytes[4]), 1);
  EXPECT_EQ(static_cast<std::uint8_t>(bytes[5]), 0);
  std::uint32_t len = 0;
  std::memcpy(&len, bytes.data() + 6, 4);
  EXPECT_EQ(bytes.size(), 10u + len);
  EXPECT_EQ(nlohmann::json::parse(bytes.substr(10))["rows"], 0);
}

TEST(Container, RejectsGarbage) {
  const auto bad = testing::bytes("PPRX\x01\x00");
  EXPECT_THROW(read_container(bad), DataError);
  std::string truncated = to_container(sample());
  truncated.resize(truncated.size() - 3);
  EXPECT_THROW(read_container({reinterpret_cast<const std::uint8_t*>(truncated.data()), truncated.size()}), DataError);
}

TEST(Container, AppendColumnsUnaligned) {
  const Table t = sample();
  Table acc = empty_table({t.columns[0].schema, t.columns[5].schema});
  Table part;
  for (int piece = 0; piece < 3; ++piece) {
    part = empty_table({t.columns[0].schema, t.columns[5].schema});
    ColumnBuilder b0(LogicalType::boolean), b5(LogicalType::utf8);
    for (std::uint64_t r = 0; r < 10; ++r) {
      b0.append(t.columns[0].data.value_at(r));
      b5.append(t.columns[5].data.value_at(r));
    }
    part.columns[0].data = std::move(b0).finish();
    part.columns[1].data = std::move(b5).finish();
    part.rows = 10;
    append_table(acc, part);
  }
  EXPECT_EQ(acc.rows, 30u);
  for (std::uint64_t r = 0; r < 30; ++r) {
    EXPECT_EQ(acc.columns[0].data.value_at(r), t.columns[0].data.value_at(r % 10));
    EXPECT_EQ(acc.columns[1].data.value_at(r), t.columns[5].data.value_at(r % 10));
  }
}

TEST(Csv, Quoting) {
  std::string out;
  append_csv_field(out, "plain");
  out += '|';
  append_csv_field(out, "");
  out += '|';
  append_csv_field(out, "a\"b");
  out += '|';
  append_csv_field(out, "x,y\nz");
  EXPECT_EQ(out, "plain|\"\"|\"a\"\"b\"|\"x,y\nz\"");
}

TEST(Csv, NullIsBareEmptyString) {
  const auto res = parse_buffer(testing::bytes("a,b\n,\"\"\n"), testing::csv(), ParseOptions{});
  // Column types are utf8; the empty fields are nulls under the default null literal.
  EXPECT_EQ(to_csv(res.table), "c0,c1\na,b\n,\n");
}

TEST(Csv, ParsesBackToSameText) {
  const auto in = testing::bytes("\"q\"\"uote\",2.5\n\"multi\nline\",-3\n");
  const auto res = parse_buffer(in, testing::csv(), ParseOptions{});
  const std::string csv = to_csv(res.table);
  EXPECT_EQ(csv, "c0,c1\n\"q\"\"uote\",2.5\n\"multi\nline\",-3\n");
}

}  // namespace
}  // namespace dsvpar
