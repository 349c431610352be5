#pragma once

// Code-unit iteration for single-byte, UTF-8 and UTF-16 inputs. A chunk that
// starts inside a multi-unit code point skips those trailing units; the chunk
// holding the code point's lead unit reads it as one symbol.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace dsvpar {

enum class EncodingId : std::uint8_t { ascii, utf8, utf16le, utf16be };

constexpr std::size_t unit_size(EncodingId enc) {
  return enc == EncodingId::utf16le || enc == EncodingId::utf16be ? 2 : 1;
}

constexpr std::string_view encoding_name(EncodingId enc) {
  switch (enc) {
    case EncodingId::ascii: return "ascii";
    case EncodingId::utf8: return "utf8";
    case EncodingId::utf16le: return "utf16le";
    case EncodingId::utf16be: return "utf16be";
  }
  return "ascii";
}

inline std::optional<EncodingId> parse_encoding(std::string_view name) {
  if (name == "ascii" || name == "ASCII-8BIT") return EncodingId::ascii;
  if (name == "utf8" || name == "UTF8" || name == "utf-8") return EncodingId::utf8;
  if (name == "utf16le" || name == "UTF16LE" || name == "utf-16le") return EncodingId::utf16le;
  if (name == "utf16be" || name == "UTF16BE" || name == "utf-16be") return EncodingId::utf16be;
  return std::nullopt;
}

constexpr bool is_utf8_continuation(std::uint8_t b) { return (b & 0xC0) == 0x80; }
constexpr bool is_high_surrogate(std::uint32_t u) { return u >= 0xD800 && u <= 0xDBFF; }
constexpr bool is_low_surrogate(std::uint32_t u) { return u >= 0xDC00 && u <= 0xDFFF; }

inline std::uint16_t load_unit16(const std::uint8_t* p, EncodingId enc) {
  return enc == EncodingId::utf16be ? static_cast<std::uint16_t>((p[0] << 8) | p[1])
                                    : static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

/// Leading bytes of `chunk` that continue a code point begun before it.
inline std::size_t continuation_prefix_len(std::span<const std::uint8_t> chunk, EncodingId enc) {
  switch (enc) {
    case EncodingId::ascii:
      return 0;
    case EncodingId::utf8: {
      std::size_t n = 0;
      while (n < chunk.size() && n < 3 && is_utf8_continuation(chunk[n])) ++n;
      return n;
    }
    case EncodingId::utf16le:
    case EncodingId::utf16be:
      return chunk.size() >= 2 && is_low_surrogate(load_unit16(chunk.data(), enc)) ? 2 : 0;
  }
  return 0;
}

/// Calls on_symbol(pos, width, unit) for every lead unit and
/// on_trailing(pos, width) for every unit that continues a code point.
/// Positions are relative to `bytes`; the first `skip` bytes are trailing.
template <class OnSymbol, class OnTrailing>
inline void for_each_unit(std::span<const std::uint8_t> bytes, EncodingId enc, std::size_t skip,
                          OnSymbol&& on_symbol, OnTrailing&& on_trailing) {
  const std::size_t n = bytes.size();
  const std::uint8_t* p = bytes.data();
  switch (enc) {
    case EncodingId::ascii:
      for (std::size_t i = 0; i < skip; ++i) on_trailing(i, std::size_t{1});
      for (std::size_t i = skip; i < n; ++i) on_symbol(i, std::size_t{1}, std::uint32_t{p[i]});
      return;
    case EncodingId::utf8:
      for (std::size_t i = 0; i < skip; ++i) on_trailing(i, std::size_t{1});
      for (std::size_t i = skip; i < n; ++i) {
        if (is_utf8_continuation(p[i])) {
          on_trailing(i, std::size_t{1});
        } else {
          on_symbol(i, std::size_t{1}, std::uint32_t{p[i]});
        }
      }
      return;
    case EncodingId::utf16le:
    case EncodingId::utf16be:
      for (std::size_t i = 0; i < skip; i += 2) on_trailing(i, std::size_t{2});
      for (std::size_t i = skip; i + 1 < n; i += 2) {
        const std::uint32_t u = load_unit16(p + i, enc);
        if (is_low_surrogate(u)) {
          on_trailing(i, std::size_t{2});
        } else {
          on_symbol(i, std::size_t{2}, u);
        }
      }
      return;
  }
}

namespace detail {

inline std::size_t put_utf8(char* out, std::uint32_t cp) {
  if (cp < 0x80) {
    out[0] = static_cast<char>(cp);
    return 1;
  }
  if (cp < 0x800) {
    out[0] = static_cast<char>(0xC0 | (cp >> 6));
    out[1] = static_cast<char>(0x80 | (cp & 0x3F));
    return 2;
  }
  if (cp < 0x10000) {
    out[0] = static_cast<char>(0xE0 | (cp >> 12));
    out[1] = static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out[2] = static_cast<char>(0x80 | (cp & 0x3F));
    return 3;
  }
  out[0] = static_cast<char>(0xF0 | (cp >> 18));
  out[1] = static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
  out[2] = static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
  out[3] = static_cast<char>(0x80 | (cp & 0x3F));
  return 4;
}

constexpr std::uint32_t kReplacement = 0xFFFD;

// Decodes the code point whose lead unit is at byte i of a UTF-16 span. Reads
// up to `limit` (which may lie past the end of the caller's slice). Returns
// the code point and stores the lead unit's byte width (2 or 4).
inline std::uint32_t decode_utf16_at(const std::uint8_t* p, std::size_t i, std::size_t limit,
                                     EncodingId enc, std::size_t& width) {
  const std::uint32_t u = load_unit16(p + i, enc);
  width = 2;
  if (is_high_surrogate(u)) {
    if (i + 3 < limit) {
      const std::uint32_t lo = load_unit16(p + i + 2, enc);
      if (is_low_surrogate(lo)) {
        width = 4;
        return 0x10000 + ((u - 0xD800) << 10) + (lo - 0xDC00);
      }
    }
    return kReplacement;
  }
  if (is_low_surrogate(u)) return kReplacement;
  return u;
}

}  // namespace detail

/// Bytes needed to hold `field` as UTF-8. UTF-8 and single-byte inputs are
/// passed through unchanged.
inline std::size_t utf8_size(std::span<const std::uint8_t> field, EncodingId enc) {
  if (unit_size(enc) == 1) return field.size();
  std::size_t total = 0;
  char tmp[4];
  for (std::size_t i = 0; i + 1 < field.size();) {
    std::size_t w;
    total += detail::put_utf8(tmp, detail::decode_utf16_at(field.data(), i, field.size(), enc, w));
    i += w;
  }
  return total;
}

/// Writes `field` as UTF-8 to `out` (which must hold utf8_size bytes) and
/// returns the number of bytes written.
inline std::size_t write_utf8(std::span<const std::uint8_t> field, EncodingId enc, char* out) {
  if (unit_size(enc) == 1) {
    if (!field.empty()) std::char_traits<char>::copy(out, reinterpret_cast<const char*>(field.data()), field.size());
    return field.size();
  }
  std::size_t o = 0;
  for (std::size_t i = 0; i + 1 < field.size();) {
    std::size_t w;
    o += detail::put_utf8(out + o, detail::decode_utf16_at(field.data(), i, field.size(), enc, w));
    i += w;
  }
  return o;
}

inline std::string to_utf8(std::span<const std::uint8_t> field, EncodingId enc) {
  std::string out(utf8_size(field, enc), '\0');
  write_utf8(field, enc, out.data());
  return out;
}

}  // namespace dsvpar
