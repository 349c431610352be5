#pragma once

// Typed columns. Fields are converted independently; a field longer than
// the big-field threshold is handled after the others by all workers
// together, using the same chunked DFA simulation and scans as the parser.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dsvpar/chunk_parse.hpp"
#include "dsvpar/columnar.hpp"
#include "dsvpar/encoding.hpp"
#include "dsvpar/error.hpp"
#include "dsvpar/scan.hpp"

namespace dsvpar {

enum class LogicalType : std::uint8_t { boolean, int64, float64, date, timestamp, utf8 };

constexpr std::string_view type_name(LogicalType t) {
  switch (t) {
    case LogicalType::boolean: return "bool";
    case LogicalType::int64: return "int64";
    case LogicalType::float64: return "float64";
    case LogicalType::date: return "date";
    case LogicalType::timestamp: return "timestamp";
    case LogicalType::utf8: return "utf8";
  }
  return "utf8";
}

inline std::optional<LogicalType> parse_type(std::string_view s) {
  if (s == "bool" || s == "boolean") return LogicalType::boolean;
  if (s == "int64" || s == "int") return LogicalType::int64;
  if (s == "float64" || s == "double" || s == "float") return LogicalType::float64;
  if (s == "date") return LogicalType::date;
  if (s == "timestamp") return LogicalType::timestamp;
  if (s == "utf8" || s == "string" || s == "utf8-string") return LogicalType::utf8;
  return std::nullopt;
}

/// Bytes per value in the data buffer; 0 for bit-packed and variable width.
constexpr std::size_t value_width(LogicalType t) {
  switch (t) {
    case LogicalType::int64:
    case LogicalType::float64:
    case LogicalType::timestamp: return 8;
    case LogicalType::date: return 4;
    default: return 0;
  }
}

struct Date {
  std::int32_t days = 0;  // since 1970-01-01
  friend bool operator==(const Date&, const Date&) = default;
};

struct Timestamp {
  std::int64_t micros = 0;  // since 1970-01-01T00:00:00
  friend bool operator==(const Timestamp&, const Timestamp&) = default;
};

using Value = std::variant<bool, std::int64_t, double, Date, Timestamp, std::string>;

// ---------------------------------------------------------------------------
// Scalar parsing

namespace detail {

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_digit);
}

inline bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    char x = a[i];
    if (x >= 'A' && x <= 'Z') x = static_cast<char>(x - 'A' + 'a');
    if (x != b[i]) return false;
  }
  return true;
}

inline int to_int(std::string_view s) {
  int v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

// [+-]? (d+ (. d*)? | . d+) ([eE] [+-]? d+)?
inline bool float_grammar(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  std::size_t int_digits = 0, frac_digits = 0;
  while (i < s.size() && is_digit(s[i])) ++i, ++int_digits;
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && is_digit(s[i])) ++i, ++frac_digits;
  }
  if (int_digits + frac_digits == 0) return false;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    std::size_t exp_digits = 0;
    while (i < s.size() && is_digit(s[i])) ++i, ++exp_digits;
    if (exp_digits == 0) return false;
  }
  return i == s.size();
}

inline std::optional<std::int32_t> civil_days(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  const auto y = s.substr(0, 4), m = s.substr(5, 2), d = s.substr(8, 2);
  if (!all_digits(y) || !all_digits(m) || !all_digits(d)) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{to_int(y)},
                                        std::chrono::month{static_cast<unsigned>(to_int(m))},
                                        std::chrono::day{static_cast<unsigned>(to_int(d))}};
  if (!ymd.ok()) return std::nullopt;
  return static_cast<std::int32_t>(std::chrono::sys_days{ymd}.time_since_epoch().count());
}

}  // namespace detail

inline std::optional<std::int64_t> parse_int64(std::string_view s) {
  std::string_view digits = s;
  if (!digits.empty() && (digits[0] == '+' || digits[0] == '-')) digits.remove_prefix(1);
  if (!detail::all_digits(digits)) return std::nullopt;
  const char* begin = s[0] == '+' ? s.data() + 1 : s.data();
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<double> parse_float64(std::string_view s) {
  if (!detail::float_grammar(s)) return std::nullopt;
  const char* begin = s[0] == '+' ? s.data() + 1 : s.data();
  double v = 0;
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v, std::chars_format::general);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<bool> parse_bool(std::string_view s) {
  if (s == "1" || detail::iequals(s, "true")) return true;
  if (s == "0" || detail::iequals(s, "false")) return false;
  return std::nullopt;
}

inline std::optional<Date> parse_date(std::string_view s) {
  const auto d = detail::civil_days(s);
  if (!d) return std::nullopt;
  return Date{*d};
}

/// YYYY-MM-DD[ T]HH:MM:SS[.f{1,9}], fractions truncated to microseconds.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
  if (s.size() < 19 || (s[10] != ' ' && s[10] != 'T')) return std::nullopt;
  const auto days = detail::civil_days(s.substr(0, 10));
  if (!days) return std::nullopt;
  const auto t = s.substr(11, 8);
  if (t[2] != ':' || t[5] != ':') return std::nullopt;
  const auto hh = t.substr(0, 2), mm = t.substr(3, 2), ss = t.substr(6, 2);
  if (!detail::all_digits(hh) || !detail::all_digits(mm) || !detail::all_digits(ss)) return std::nullopt;
  const int h = detail::to_int(hh), mi = detail::to_int(mm), se = detail::to_int(ss);
  if (h > 23 || mi > 59 || se > 59) return std::nullopt;
  std::int64_t micros = 0;
  if (s.size() > 19) {
    const auto frac = s.substr(20);
    if (s[19] != '.' || frac.size() > 9 || !detail::all_digits(frac)) return std::nullopt;
    for (std::size_t i = 0; i < 6; ++i) micros = micros * 10 + (i < frac.size() ? frac[i] - '0' : 0);
  }
  const std::int64_t secs = std::int64_t{*days} * 86400 + h * 3600 + mi * 60 + se;
  return Timestamp{secs * 1000000 + micros};
}

inline std::optional<Value> try_parse(std::string_view s, LogicalType type) {
  switch (type) {
    case LogicalType::boolean:
      if (auto v = parse_bool(s)) return Value{*v};
      return std::nullopt;
    case LogicalType::int64:
      if (auto v = parse_int64(s)) return Value{*v};
      return std::nullopt;
    case LogicalType::float64:
      if (auto v = parse_float64(s)) return Value{*v};
      return std::nullopt;
    case LogicalType::date:
      if (auto v = parse_date(s)) return Value{*v};
      return std::nullopt;
    case LogicalType::timestamp:
      if (auto v = parse_timestamp(s)) return Value{*v};
      return std::nullopt;
    case LogicalType::utf8:
      return Value{std::string(s)};
  }
  return std::nullopt;
}

inline Value parse_scalar(std::string_view s, LogicalType type) {
  auto v = try_parse(s, type);
  if (!v) throw DataError("cannot parse '" + std::string(s.substr(0, 64)) + "' as " + std::string(type_name(type)));
  return *v;
}

inline std::string format_date(std::int32_t days) {
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

inline std::string format_timestamp(std::int64_t micros) {
  std::int64_t days = micros / 86400000000LL;
  std::int64_t rest = micros % 86400000000LL;
  if (rest < 0) {
    rest += 86400000000LL;
    --days;
  }
  const std::int64_t secs = rest / 1000000, frac = rest % 1000000;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s %02d:%02d:%02d", format_date(static_cast<std::int32_t>(days)).c_str(),
                static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60), static_cast<int>(secs % 60));
  std::string out = buf;
  if (frac != 0) {
    std::snprintf(buf, sizeof buf, ".%06d", static_cast<int>(frac));
    out += buf;
  }
  return out;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// Type inference

/// Lattice element bool < int64 < float64 < utf8. Empty fields are neutral
/// (seen = false). Word booleans ("true"/"false") only join with other
/// booleans; a numeric column that also holds one widens to utf8.
struct InferState {
  bool seen = false;
  LogicalType type = LogicalType::boolean;
  bool word_bool = false;

  friend bool operator==(const InferState&, const InferState&) = default;
};

inline int lattice_rank(LogicalType t) {
  switch (t) {
    case LogicalType::boolean: return 0;
    case LogicalType::int64: return 1;
    case LogicalType::float64: return 2;
    default: return 3;
  }
}

inline InferState join(const InferState& a, const InferState& b) {
  if (!a.seen) return b;
  if (!b.seen) return a;
  InferState out;
  out.seen = true;
  out.type = lattice_rank(a.type) >= lattice_rank(b.type) ? a.type : b.type;
  out.word_bool = a.word_bool || b.word_bool;
  return out;
}

inline InferState classify(std::string_view s) {
  if (s.empty()) return {};
  if (s == "0" || s == "1") return {true, LogicalType::boolean, false};
  if (parse_int64(s)) return {true, LogicalType::int64, false};
  if (parse_float64(s)) return {true, LogicalType::float64, false};
  if (parse_bool(s)) return {true, LogicalType::boolean, true};
  return {true, LogicalType::utf8, false};
}

inline LogicalType finalize(const InferState& s) {
  if (!s.seen) return LogicalType::utf8;
  if (s.word_bool && (s.type == LogicalType::int64 || s.type == LogicalType::float64)) return LogicalType::utf8;
  return s.type;
}

// ---------------------------------------------------------------------------
// Schema

struct ColumnSchema {
  std::string name;
  LogicalType type = LogicalType::utf8;
  bool nullable = true;
  std::optional<Value> default_value;
  std::vector<std::string> null_literals;

  bool is_null_literal(std::string_view s) const {
    return std::find(null_literals.begin(), null_literals.end(), s) != null_literals.end();
  }

  friend bool operator==(const ColumnSchema&, const ColumnSchema&) = default;
};

using Schema = std::vector<ColumnSchema>;

inline Value default_from_json(const nlohmann::json& j, LogicalType type, const std::string& column) {
  auto fail = [&] { return ConfigError("default for column '" + column + "' does not match its type"); };
  switch (type) {
    case LogicalType::boolean:
      if (!j.is_boolean()) throw fail();
      return j.get<bool>();
    case LogicalType::int64:
      if (!j.is_number_integer()) throw fail();
      return j.get<std::int64_t>();
    case LogicalType::float64:
      if (!j.is_number()) throw fail();
      return j.get<double>();
    case LogicalType::date:
    case LogicalType::timestamp:
    case LogicalType::utf8: {
      if (!j.is_string()) throw fail();
      auto v = try_parse(j.get<std::string>(), type);
      if (!v) throw fail();
      return *v;
    }
  }
  throw fail();
}

inline nlohmann::json value_to_json(const Value& v) {
  return std::visit(
      [](const auto& x) -> nlohmann::json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Date>) {
          return format_date(x.days);
        } else if constexpr (std::is_same_v<T, Timestamp>) {
          return format_timestamp(x.micros);
        } else {
          return x;
        }
      },
      v);
}

/// Accepts either an array of column objects or {"columns": [...]}.
inline Schema load_schema(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("schema: ") + e.what());
  }
  if (doc.is_object() && doc.contains("columns")) doc = doc["columns"];
  if (!doc.is_array()) throw ConfigError("schema: expected an array of columns");
  Schema schema;
  for (const auto& c : doc) {
    if (!c.is_object() || !c.contains("name") || !c.contains("type")) {
      throw ConfigError("schema: every column needs a name and a type");
    }
    ColumnSchema col;
    col.name = c["name"].get<std::string>();
    const auto type = parse_type(c["type"].get<std::string>());
    if (!type) throw ConfigError("schema: unknown type '" + c["type"].get<std::string>() + "'");
    col.type = *type;
    col.nullable = c.value("nullable", true);
    if (c.contains("null_literals")) {
      col.null_literals = c["null_literals"].get<std::vector<std::string>>();
    } else {
      col.null_literals = {""};
    }
    if (c.contains("default") && !c["default"].is_null()) col.default_value = default_from_json(c["default"], col.type, col.name);
    schema.push_back(std::move(col));
  }
  return schema;
}

inline nlohmann::json schema_to_json(const Schema& schema) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : schema) {
    nlohmann::json j = {{"name", c.name}, {"type", type_name(c.type)}, {"nullable", c.nullable},
                        {"null_literals", c.null_literals}};
    j["default"] = c.default_value ? value_to_json(*c.default_value) : nlohmann::json(nullptr);
    out.push_back(std::move(j));
  }
  return out;
}

inline ColumnSchema inferred_column(std::size_t input_index, LogicalType type) {
  return ColumnSchema{"c" + std::to_string(input_index), type, true, std::nullopt, {""}};
}

// ---------------------------------------------------------------------------
// Typed columns

/// Validity bitmap (LSB-first, byte-aligned) plus data; utf8 columns also
/// carry length + 1 offsets into `data`. Null slots hold zero.
struct TypedColumn {
  LogicalType type = LogicalType::utf8;
  std::uint64_t length = 0;
  std::uint64_t null_count = 0;
  std::vector<std::uint8_t> validity;
  std::vector<std::uint32_t> offsets;
  std::vector<std::uint8_t> data;

  bool is_valid(std::uint64_t i) const { return validity[i >> 3] >> (i & 7) & 1; }

  std::string_view string_at(std::uint64_t i) const {
    return {reinterpret_cast<const char*>(data.data()) + offsets[i], offsets[i + 1] - offsets[i]};
  }
  template <class T>
  T fixed_at(std::uint64_t i) const {
    T v;
    std::memcpy(&v, data.data() + i * sizeof(T), sizeof(T));
    return v;
  }
  bool bool_at(std::uint64_t i) const { return data[i >> 3] >> (i & 7) & 1; }

  std::optional<Value> value_at(std::uint64_t i) const {
    if (!is_valid(i)) return std::nullopt;
    switch (type) {
      case LogicalType::boolean: return Value{bool_at(i)};
      case LogicalType::int64: return Value{fixed_at<std::int64_t>(i)};
      case LogicalType::float64: return Value{fixed_at<double>(i)};
      case LogicalType::date: return Value{Date{fixed_at<std::int32_t>(i)}};
      case LogicalType::timestamp: return Value{Timestamp{fixed_at<std::int64_t>(i)}};
      case LogicalType::utf8: return Value{std::string(string_at(i))};
    }
    return std::nullopt;
  }

  friend bool operator==(const TypedColumn&, const TypedColumn&) = default;
};

inline TypedColumn empty_column(LogicalType type) {
  TypedColumn c;
  c.type = type;
  if (type == LogicalType::utf8) c.offsets = {0};
  return c;
}

namespace detail {

inline void set_bit(std::vector<std::uint8_t>& bits, std::uint64_t i, bool v) {
  if (v) bits[i >> 3] = static_cast<std::uint8_t>(bits[i >> 3] | (1u << (i & 7)));
}

// Appends `n` bits of `src` to `dst`, which currently holds `dst_bits`.
inline void append_bits(std::vector<std::uint8_t>& dst, std::uint64_t dst_bits, const std::vector<std::uint8_t>& src,
                        std::uint64_t n) {
  dst.resize((dst_bits + n + 7) / 8, 0);
  const unsigned shift = static_cast<unsigned>(dst_bits & 7);
  const std::uint64_t base = dst_bits >> 3;
  const std::uint64_t src_bytes = (n + 7) / 8;
  if (shift == 0) {
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(src_bytes), dst.begin() + static_cast<std::ptrdiff_t>(base));
  } else {
    for (std::uint64_t k = 0; k < src_bytes; ++k) {
      const unsigned v = src[k];
      dst[base + k] = static_cast<std::uint8_t>(dst[base + k] | (v << shift));
      if (base + k + 1 < dst.size()) dst[base + k + 1] = static_cast<std::uint8_t>(v >> (8 - shift));
    }
  }
  if ((dst_bits + n) & 7) dst.back() = static_cast<std::uint8_t>(dst.back() & ((1u << ((dst_bits + n) & 7)) - 1));
}

}  // namespace detail

/// Sequential one-value-at-a-time construction.
class ColumnBuilder {
 public:
  explicit ColumnBuilder(LogicalType type) : col_(empty_column(type)) {}

  void append_null() {
    grow();
    ++col_.null_count;
    switch (col_.type) {
      case LogicalType::utf8: col_.offsets.push_back(col_.offsets.back()); break;
      case LogicalType::boolean: break;
      default: col_.data.resize(col_.data.size() + value_width(col_.type), 0);
    }
    ++col_.length;
  }

  /// `v` must hold the column's type.
  void append(const Value& v) {
    grow();
    detail::set_bit(col_.validity, col_.length, true);
    switch (col_.type) {
      case LogicalType::boolean: detail::set_bit(col_.data, col_.length, std::get<bool>(v)); break;
      case LogicalType::int64: put(std::get<std::int64_t>(v)); break;
      case LogicalType::float64: put(std::get<double>(v)); break;
      case LogicalType::date: put(std::get<Date>(v).days); break;
      case LogicalType::timestamp: put(std::get<Timestamp>(v).micros); break;
      case LogicalType::utf8: {
        const auto& s = std::get<std::string>(v);
        col_.data.insert(col_.data.end(), s.begin(), s.end());
        if (col_.data.size() > 0xFFFFFFFFu) throw DataError("utf8 column larger than 4 GiB");
        col_.offsets.push_back(static_cast<std::uint32_t>(col_.data.size()));
        break;
      }
    }
    ++col_.length;
  }

  void append(const std::optional<Value>& v) {
    if (v) {
      append(*v);
    } else {
      append_null();
    }
  }

  TypedColumn finish() && { return std::move(col_); }

 private:
  void grow() {
    if ((col_.length & 7) == 0) {
      col_.validity.push_back(0);
      if (col_.type == LogicalType::boolean) col_.data.push_back(0);
    }
  }
  template <class T>
  void put(T v) {
    const auto at = col_.data.size();
    col_.data.resize(at + sizeof(T));
    std::memcpy(col_.data.data() + at, &v, sizeof(T));
  }

  TypedColumn col_;
};

/// dst ++= src (same type).
inline void append_column(TypedColumn& dst, const TypedColumn& src) {
  if (dst.type != src.type) throw Error("append_column: type mismatch");
  detail::append_bits(dst.validity, dst.length, src.validity, src.length);
  switch (dst.type) {
    case LogicalType::boolean: detail::append_bits(dst.data, dst.length, src.data, src.length); break;
    case LogicalType::utf8: {
      const std::uint64_t base = dst.data.size();
      if (base + src.data.size() > 0xFFFFFFFFu) throw DataError("utf8 column larger than 4 GiB");
      dst.data.insert(dst.data.end(), src.data.begin(), src.data.end());
      for (std::size_t i = 1; i < src.offsets.size(); ++i) {
        dst.offsets.push_back(static_cast<std::uint32_t>(base + src.offsets[i]));
      }
      break;
    }
    default: dst.data.insert(dst.data.end(), src.data.begin(), src.data.end());
  }
  dst.length += src.length;
  dst.null_count += src.null_count;
}

// ---------------------------------------------------------------------------
// Column conversion

/// Fields of one column: field i spans data[ends[i-1], ends[i]). Rows at or
/// past `valid_rows` belong to invalid records and are null.
struct ColumnView {
  std::span<const std::uint8_t> data;
  std::span<const std::uint64_t> ends;
  EncodingId encoding = EncodingId::ascii;
  std::uint64_t rows = 0;
  std::uint64_t valid_rows = 0;

  std::size_t field_count() const { return ends.size(); }
  FieldRef field(std::uint64_t i) const {
    const std::uint64_t begin = i ? ends[i - 1] : 0;
    return {begin, static_cast<std::uint32_t>(ends[i] - begin)};
  }
};

struct ConvertOptions {
  std::size_t big_field_threshold = 4096;
  bool strict = false;
  std::uint64_t row_base = 0;                   // global row of row 0, for error messages
  const Selection* selection = nullptr;         // maps rows back to input records
  std::size_t column_index = 0;                 // input column, for error messages
};

namespace detail {

inline std::string excerpt(std::string_view s) {
  return std::string(s.substr(0, 40)) + (s.size() > 40 ? "..." : "");
}

// Parallel count/scan/write transcode of one large field.
inline std::string text_parallel(std::span<const std::uint8_t> field, EncodingId enc, WorkerPool& pool) {
  constexpr std::size_t kPiece = 1 << 16;
  const std::size_t pieces = (field.size() + kPiece - 1) / kPiece;
  if (unit_size(enc) == 1) {
    std::string out(field.size(), '\0');
    pool.parallel_for(pieces, [&](std::size_t p) {
      const std::size_t b = p * kPiece, e = std::min(field.size(), b + kPiece);
      std::memcpy(out.data() + b, field.data() + b, e - b);
    });
    return out;
  }
  // Each piece writes the code points whose lead unit it holds.
  auto each = [&](std::size_t p, auto&& emit) {
    const std::size_t b = p * kPiece, e = std::min(field.size(), b + kPiece);
    std::size_t i = b + continuation_prefix_len(field.subspan(b, e - b), enc);
    while (i + 1 < e + 0 && i + 1 < field.size()) {
      std::size_t w;
      emit(detail::decode_utf16_at(field.data(), i, field.size(), enc, w));
      i += w;
    }
  };
  std::vector<std::uint64_t> sizes(pieces + 1, 0);
  pool.parallel_for(pieces, [&](std::size_t p) {
    char tmp[4];
    std::uint64_t n = 0;
    each(p, [&](std::uint32_t cp) { n += put_utf8(tmp, cp); });
    sizes[p] = n;
  });
  const auto total = exclusive_scan_inplace(
      std::span<std::uint64_t>(sizes.data(), pieces), [](std::uint64_t a, std::uint64_t b) { return a + b; },
      std::uint64_t{0}, pool);
  std::string out(total, '\0');
  pool.parallel_for(pieces, [&](std::size_t p) {
    char* dst = out.data() + sizes[p];
    each(p, [&](std::uint32_t cp) { dst += put_utf8(dst, cp); });
  });
  return out;
}

// Grammar automata for numeric fields, run chunk-parallel on large fields
// before the scalar parse.
inline const Dialect& number_grammar(bool integer) {
  // states: 0 start, 1 sign, 2 int, 3 dot (no digits), 4 frac, 5 exp, 6 exp sign, 7 exp int, 8 invalid
  // groups: digit, sign, dot, exponent, other
  static const Dialect grammars[2] = {
      [] {
        std::vector<SymbolGroup> groups = {{{'0', '1', '2', '3', '4', '5', '6', '7', '8', '9'}, false},
                                           {{'+', '-'}, false},
                                           {{'.'}, false},
                                           {{'e', 'E'}, false},
                                           {{}, true}};
        std::vector<StateIndex> t = {
            2, 2, 2, 4, 4, 7, 7, 7, 8,  // digit
            1, 8, 8, 8, 8, 6, 8, 8, 8,  // sign
            3, 3, 4, 8, 8, 8, 8, 8, 8,  // dot
            8, 8, 5, 8, 5, 8, 8, 8, 8,  // exponent
            8, 8, 8, 8, 8, 8, 8, 8, 8,  // other
        };
        std::vector<EmissionAction> e(t.size());
        return Dialect(DfaSpec({"start", "sign", "int", "dot", "frac", "exp", "expsign", "expint", "inv"}, 0,
                               {2, 4, 7}, 8, std::move(groups), std::move(t), std::move(e)));
      }(),
      [] {
        std::vector<SymbolGroup> groups = {{{'0', '1', '2', '3', '4', '5', '6', '7', '8', '9'}, false},
                                           {{'+', '-'}, false},
                                           {{}, true}};
        std::vector<StateIndex> t = {
            2, 2, 2, 3,  // digit
            1, 3, 3, 3,  // sign
            3, 3, 3, 3,  // other
        };
        std::vector<EmissionAction> e(t.size());
        return Dialect(DfaSpec({"start", "sign", "int", "inv"}, 0, {2}, 3, std::move(groups), std::move(t),
                               std::move(e)));
      }(),
  };
  return grammars[integer ? 1 : 0];
}

inline bool grammar_accepts_parallel(std::string_view s, bool integer, WorkerPool& pool) {
  const Dialect& g = number_grammar(integer);
  const std::size_t chunks = (s.size() + kMaxChunkSize - 1) / kMaxChunkSize;
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(s.data());
  std::vector<StateTransitionVector> stvs(chunks);
  pool.for_each_block(chunks, 1024, [&](std::size_t b, std::size_t e) {
    for (std::size_t c = b; c < e; ++c) {
      const std::size_t off = c * kMaxChunkSize;
      stvs[c] = simulate_chunk_all_states({bytes + off, std::min(kMaxChunkSize, s.size() - off)}, g.spec, g.matcher,
                                          EncodingId::ascii);
    }
  });
  const auto resolved = resolve_start_states(std::move(stvs), g.spec.start_state(), g.spec.state_count(), pool);
  return g.spec.is_accepting(resolved.end_state);
}

}  // namespace detail

/// Outcome of a single field under a column schema.
enum class FieldOutcome : std::uint8_t { value, null, error };

/// Decides a field from its text. Missing and empty fields share one rule:
/// null if "" is a null literal of a nullable column, else the default, else
/// an empty string for utf8, else null if nullable, else an error.
inline FieldOutcome decide_field(std::string_view text, const ColumnSchema& col, std::optional<Value>& out) {
  if (text.empty()) {
    if (col.nullable && col.is_null_literal("")) return FieldOutcome::null;
    if (col.default_value) {
      out = col.default_value;
      return FieldOutcome::value;
    }
    if (col.type == LogicalType::utf8) {
      out = Value{std::string()};
      return FieldOutcome::value;
    }
    return col.nullable ? FieldOutcome::null : FieldOutcome::error;
  }
  if (col.nullable && col.is_null_literal(text)) return FieldOutcome::null;
  out = try_parse(text, col.type);
  return out ? FieldOutcome::value : FieldOutcome::error;
}

struct ConvertResult {
  TypedColumn column;
  std::uint64_t conversion_errors = 0;
};

/// Converts all fields of a column. Blocks of rows are converted in
/// parallel; fields longer than the threshold are deferred and converted one
/// after another with every worker taking a share of the field.
inline ConvertResult convert_column(const ColumnView& view, const ColumnSchema& col, const ConvertOptions& opt,
                                    WorkerPool& pool) {
  const std::uint64_t rows = view.rows;
  const LogicalType type = col.type;
  const bool text_type = type == LogicalType::utf8;
  ConvertResult res;
  TypedColumn& out = res.column;
  out.type = type;
  out.length = rows;
  out.validity.assign((rows + 7) / 8, 0);
  if (type == LogicalType::boolean) out.data.assign((rows + 7) / 8, 0);
  if (value_width(type)) out.data.assign(rows * value_width(type), 0);
  if (text_type) out.offsets.assign(rows + 1, 0);

  constexpr std::size_t kRowBlock = 4096;  // multiple of 8: blocks own whole bitmap bytes
  const std::size_t blocks = (rows + kRowBlock - 1) / kRowBlock;
  std::vector<std::uint64_t> errors(blocks, 0);
  std::vector<std::vector<std::uint64_t>> deferred(blocks);

  // utf8 values are sized first and written after a scan over the sizes.
  // Row payloads: the field itself, the default, or a materialized big field.
  enum : std::uint8_t { kFromField = 0, kFromDefault = 1, kFromBig = 2 };
  std::vector<std::uint8_t> source(text_type ? rows : 0, kFromField);
  std::vector<std::pair<std::uint64_t, std::string>> big_texts;
  const std::string default_text =
      text_type && col.default_value ? std::get<std::string>(*col.default_value) : std::string();

  auto fail = [&](std::uint64_t row, std::string_view text) {
    if (opt.strict) {
      const std::uint64_t global = opt.row_base + row;
      const std::uint64_t record = opt.selection ? opt.selection->record_of_row(global) : global;
      throw ConversionError(record, opt.column_index, detail::excerpt(text));
    }
  };

  auto store = [&](std::uint64_t row, Value&& v, bool from_field) {
    detail::set_bit(out.validity, row, true);
    switch (type) {
      case LogicalType::boolean: detail::set_bit(out.data, row, std::get<bool>(v)); break;
      case LogicalType::int64: std::memcpy(out.data.data() + row * 8, &std::get<std::int64_t>(v), 8); break;
      case LogicalType::float64: std::memcpy(out.data.data() + row * 8, &std::get<double>(v), 8); break;
      case LogicalType::date: std::memcpy(out.data.data() + row * 4, &std::get<Date>(v).days, 4); break;
      case LogicalType::timestamp: std::memcpy(out.data.data() + row * 8, &std::get<Timestamp>(v).micros, 8); break;
      case LogicalType::utf8: {
        const std::size_t n = std::get<std::string>(v).size();
        if (n > 0xFFFFFFFFu) throw DataError("utf8 value larger than 4 GiB");
        out.offsets[row] = static_cast<std::uint32_t>(n);
        if (!from_field) source[row] = kFromDefault;
        break;
      }
    }
  };

  // Returns false for a failed conversion.
  auto convert_text = [&](std::uint64_t row, std::string_view text) {
    std::optional<Value> v;
    switch (decide_field(text, col, v)) {
      case FieldOutcome::value: {
        const bool from_field = !text.empty() || !col.default_value;
        if (text_type && from_field) {
          // Avoid holding a copy: only the size matters until the write pass.
          detail::set_bit(out.validity, row, true);
          out.offsets[row] = static_cast<std::uint32_t>(text.size());
        } else {
          store(row, std::move(*v), from_field);
        }
        return true;
      }
      case FieldOutcome::null: return true;
      case FieldOutcome::error: fail(row, text); return false;
    }
    return true;
  };

  auto field_text = [&](const FieldRef& f, std::string& buf) -> std::string_view {
    const auto bytes = view.data.subspan(f.offset, f.length);
    if (unit_size(view.encoding) == 1) return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
    buf = to_utf8(bytes, view.encoding);
    return buf;
  };

  pool.parallel_for(blocks, [&](std::size_t b) {
    const std::uint64_t end = std::min<std::uint64_t>(rows, (b + 1) * kRowBlock);
    std::string buf;
    for (std::uint64_t r = b * kRowBlock; r < end; ++r) {
      if (r >= view.valid_rows || r >= view.field_count()) continue;
      const FieldRef f = view.field(r);
      if (f.length > opt.big_field_threshold) {
        deferred[b].push_back(r);
        continue;
      }
      if (!convert_text(r, field_text(f, buf))) ++errors[b];
    }
  });

  for (const auto& list : deferred) {
    for (std::uint64_t r : list) {
      const FieldRef f = view.field(r);
      std::string text = detail::text_parallel(view.data.subspan(f.offset, f.length), view.encoding, pool);
      if (type == LogicalType::int64 || type == LogicalType::float64) {
        if (!(col.nullable && col.is_null_literal(text)) &&
            !detail::grammar_accepts_parallel(text, type == LogicalType::int64, pool)) {
          fail(r, text);
          ++res.conversion_errors;
          continue;
        }
      }
      if (!convert_text(r, text)) {
        ++res.conversion_errors;
      } else if (text_type && source[r] == kFromField && out.is_valid(r)) {
        source[r] = kFromBig;
        big_texts.emplace_back(r, std::move(text));
      }
    }
  }
  for (std::size_t b = 0; b < blocks; ++b) res.conversion_errors += errors[b];

  if (text_type) {
    std::vector<std::uint64_t> partial(blocks, 0);
    pool.parallel_for(blocks, [&](std::size_t b) {
      std::uint64_t s = 0;
      for (std::uint64_t r = b * kRowBlock, e = std::min<std::uint64_t>(rows, (b + 1) * kRowBlock); r < e; ++r) {
        s += out.offsets[r];
      }
      partial[b] = s;
    });
    std::uint64_t total = 0;
    for (auto p : partial) total += p;
    if (total > 0xFFFFFFFFu) throw DataError("utf8 column larger than 4 GiB");
    exclusive_scan_inplace(
        std::span<std::uint32_t>(out.offsets), [](std::uint32_t a, std::uint32_t b) { return a + b; },
        std::uint32_t{0}, pool);
    out.data.resize(total);
    pool.parallel_for(blocks, [&](std::size_t b) {
      for (std::uint64_t r = b * kRowBlock, e = std::min<std::uint64_t>(rows, (b + 1) * kRowBlock); r < e; ++r) {
        const std::uint32_t len = out.offsets[r + 1] - out.offsets[r];
        if (len == 0) continue;
        char* dst = reinterpret_cast<char*>(out.data.data()) + out.offsets[r];
        if (source[r] == kFromDefault) {
          std::memcpy(dst, default_text.data(), len);
        } else if (source[r] == kFromField) {
          const FieldRef f = view.field(r);
          write_utf8(view.data.subspan(f.offset, f.length), view.encoding, dst);
        }
      }
    });
    for (const auto& [r, text] : big_texts) {
      char* dst = reinterpret_cast<char*>(out.data.data()) + out.offsets[r];
      pool.for_each_block(text.size(), 1 << 16, [&](std::size_t b, std::size_t e) {
        std::memcpy(dst + b, text.data() + b, e - b);
      });
    }
  }

  std::uint64_t valid = 0;
  for (auto byte : out.validity) valid += static_cast<std::uint64_t>(std::popcount(byte));
  out.null_count = rows - valid;
  return res;
}

/// Joins the inferred type of every field of a column (valid rows only).
inline InferState infer_column(const ColumnView& view, WorkerPool& pool) {
  const std::uint64_t n = std::min<std::uint64_t>(view.valid_rows, view.field_count());
  constexpr std::size_t kBlock = 4096;
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<InferState> partial(blocks);
  pool.parallel_for(blocks, [&](std::size_t b) {
    InferState acc;
    std::string buf;
    for (std::uint64_t r = b * kBlock, e = std::min<std::uint64_t>(n, (b + 1) * kBlock); r < e; ++r) {
      const FieldRef f = view.field(r);
      const auto bytes = view.data.subspan(f.offset, f.length);
      if (unit_size(view.encoding) == 1) {
        acc = join(acc, classify({reinterpret_cast<const char*>(bytes.data()), bytes.size()}));
      } else {
        buf = to_utf8(bytes, view.encoding);
        acc = join(acc, classify(buf));
      }
    }
    partial[b] = acc;
  });
  InferState total;
  for (const auto& p : partial) total = join(total, p);
  return total;
}

inline LogicalType infer_type(const ColumnView& view, WorkerPool& pool) { return finalize(infer_column(view, pool)); }

}  // namespace dsvpar
