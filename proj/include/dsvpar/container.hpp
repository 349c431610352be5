#pragma once

// Columnar output container:
//
//   "PPRW" | u16 version = 1 | u32 n | n bytes schema JSON
//   per column: u64 validity bytes | u64 offsets bytes | u64 data bytes
//               validity bitmap | offsets (u32, utf8 only) | data
//
// All integers little-endian. The schema JSON is
// {"columns":[{"name","type","nullable","null_count"}],"rows":N}.

#include <bit>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dsvpar/error.hpp"
#include "dsvpar/typeconv.hpp"

namespace dsvpar {

struct OutputColumn {
  ColumnSchema schema;
  TypedColumn data;

  friend bool operator==(const OutputColumn&, const OutputColumn&) = default;
};

struct Table {
  std::vector<OutputColumn> columns;
  std::uint64_t rows = 0;

  friend bool operator==(const Table&, const Table&) = default;
};

/// An empty table with one empty column per schema entry.
inline Table empty_table(const Schema& schema) {
  Table t;
  for (const auto& c : schema) t.columns.push_back({c, empty_column(c.type)});
  return t;
}

/// dst ++= src; both must have the same columns.
inline void append_table(Table& dst, const Table& src) {
  if (dst.columns.size() != src.columns.size()) throw Error("append_table: column count mismatch");
  for (std::size_t c = 0; c < dst.columns.size(); ++c) append_column(dst.columns[c].data, src.columns[c].data);
  dst.rows += src.rows;
}

inline constexpr char kMagic[4] = {'P', 'P', 'R', 'W'};
inline constexpr std::uint16_t kContainerVersion = 1;

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::endian::native == std::endian::little, "container writer assumes a little-endian host");
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get_le(std::span<const std::uint8_t> in, std::size_t& at) {
  if (at + sizeof(T) > in.size()) throw DataError("container truncated", at);
  T v;
  std::memcpy(&v, in.data() + at, sizeof v);
  at += sizeof v;
  return v;
}

}  // namespace detail

inline std::string container_schema_json(const Table& t) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : t.columns) {
    cols.push_back({{"name", c.schema.name},
                    {"type", type_name(c.schema.type)},
                    {"nullable", c.schema.nullable},
                    {"null_count", c.data.null_count}});
  }
  return nlohmann::json{{"columns", cols}, {"rows", t.rows}}.dump();
}

inline std::string to_container(const Table& t) {
  std::string out(kMagic, 4);
  detail::put_le<std::uint16_t>(out, kContainerVersion);
  const std::string schema = container_schema_json(t);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(schema.size()));
  out += schema;
  for (const auto& c : t.columns) {
    const auto& d = c.data;
    const std::uint64_t offsets_bytes = d.type == LogicalType::utf8 ? d.offsets.size() * 4 : 0;
    detail::put_le<std::uint64_t>(out, d.validity.size());
    detail::put_le<std::uint64_t>(out, offsets_bytes);
    detail::put_le<std::uint64_t>(out, d.data.size());
    out.append(reinterpret_cast<const char*>(d.validity.data()), d.validity.size());
    if (offsets_bytes) out.append(reinterpret_cast<const char*>(d.offsets.data()), offsets_bytes);
    out.append(reinterpret_cast<const char*>(d.data.data()), d.data.size());
  }
  return out;
}

inline void write_container(std::ostream& os, const Table& t) {
  const std::string bytes = to_container(t);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed to write container");
}

inline Table read_container(std::span<const std::uint8_t> in) {
  if (in.size() < 4 || std::memcmp(in.data(), kMagic, 4) != 0) throw DataError("not a PPRW container", 0);
  std::size_t at = 4;
  const auto version = detail::get_le<std::uint16_t>(in, at);
  if (version != kContainerVersion) throw DataError("unsupported container version " + std::to_string(version), 4);
  const auto len = detail::get_le<std::uint32_t>(in, at);
  if (at + len > in.size()) throw DataError("container truncated", at);
  const auto doc = nlohmann::json::parse(std::string_view(reinterpret_cast<const char*>(in.data() + at), len));
  at += len;
  Table t;
  t.rows = doc.at("rows").get<std::uint64_t>();
  for (const auto& jc : doc.at("columns")) {
    OutputColumn col;
    col.schema.name = jc.at("name").get<std::string>();
    const auto type = parse_type(jc.at("type").get<std::string>());
    if (!type) throw DataError("unknown column type in container");
    col.schema.type = *type;
    col.schema.nullable = jc.at("nullable").get<bool>();
    col.data.type = *type;
    col.data.length = t.rows;
    col.data.null_count = jc.at("null_count").get<std::uint64_t>();
    const auto vb = detail::get_le<std::uint64_t>(in, at);
    const auto ob = detail::get_le<std::uint64_t>(in, at);
    const auto db = detail::get_le<std::uint64_t>(in, at);
    if (at + vb + ob + db > in.size()) throw DataError("container truncated", at);
    col.data.validity.assign(in.begin() + static_cast<std::ptrdiff_t>(at), in.begin() + static_cast<std::ptrdiff_t>(at + vb));
    at += vb;
    col.data.offsets.resize(ob / 4);
    if (ob) std::memcpy(col.data.offsets.data(), in.data() + at, ob);
    at += ob;
    col.data.data.assign(in.begin() + static_cast<std::ptrdiff_t>(at), in.begin() + static_cast<std::ptrdiff_t>(at + db));
    at += db;
    t.columns.push_back(std::move(col));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Canonical CSV

inline std::string format_value(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, bool>) {
          return x ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(x);
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(x);
        } else if constexpr (std::is_same_v<T, Date>) {
          return format_date(x.days);
        } else if constexpr (std::is_same_v<T, Timestamp>) {
          return format_timestamp(x.micros);
        } else {
          return x;
        }
      },
      v);
}

/// Quotes a field when it is empty or holds the delimiter, a quote or a line break.
inline void append_csv_field(std::string& out, std::string_view s, char delim = ',') {
  const bool quote = s.empty() || s.find_first_of(std::string{delim, '"', '\n', '\r'}) != std::string_view::npos;
  if (!quote) {
    out += s;
    return;
  }
  out += '"';
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

/// Header line of column names, then one line per row; nulls are empty.
inline std::string to_csv(const Table& t, char delim = ',') {
  std::string out;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (c) out += delim;
    append_csv_field(out, t.columns[c].schema.name, delim);
  }
  out += '\n';
  for (std::uint64_t r = 0; r < t.rows; ++r) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      if (c) out += delim;
      const auto v = t.columns[c].data.value_at(r);
      if (v) append_csv_field(out, format_value(*v), delim);
    }
    out += '\n';
  }
  return out;
}

}  // namespace dsvpar
