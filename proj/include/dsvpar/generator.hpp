#pragma once

// Seeded synthetic DSV corpora: RFC 4180 quoting, configurable field sizes,
// quote density and embedded delimiters, an optional giant record, and a
// multilingual UTF-8 mode. Output depends only on the config (the RNG is
// used through raw 64-bit draws, never through std distributions).

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dsvpar/encoding.hpp"
#include "dsvpar/error.hpp"

namespace dsvpar {

enum class SizeDistribution : std::uint8_t { fixed, uniform, geometric };

struct GenConfig {
  std::uint64_t seed = 1;
  std::uint64_t target_bytes = 1 << 20;  // generation stops at the first record boundary past this
  std::uint32_t columns = 8;
  SizeDistribution field_size = SizeDistribution::geometric;
  std::uint32_t mean_field_bytes = 8;
  double quote_density = 0.2;     // share of text fields that are quoted
  double embedded_rate = 0.1;     // per quoted field: chance of an embedded ',', '\n' or '""'
  double empty_rate = 0.05;
  double numeric_share = 0.5;     // share of columns holding numbers
  bool final_newline = true;
  bool multilingual = false;
  std::uint64_t skew_bytes = 0;   // >0: one record holds a quoted field of this many bytes
  char delimiter = ',';
};

namespace gen_detail {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  std::uint64_t next() { return eng_(); }
  std::uint64_t below(std::uint64_t n) { return n ? next() % n : 0; }
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }

 private:
  std::mt19937_64 eng_;
};

inline constexpr std::string_view kAscii[] = {"alpha", "beta", "gamma", "delta", "omega", "kappa",
                                              "red",   "blue", "green", "north", "south", "x"};
inline constexpr std::string_view kWorld[] = {"Grüße",  "naïve",  "日本語", "Ελλάδα", "Привет", "مرحبا",
                                              "한국어", "emoji😀", "𝄞clef",  "ø",      "中文",   "ascii"};

inline std::uint64_t draw_size(Rng& rng, SizeDistribution d, std::uint32_t mean) {
  switch (d) {
    case SizeDistribution::fixed: return mean;
    case SizeDistribution::uniform: return 1 + rng.below(2ull * mean);
    case SizeDistribution::geometric: {
      std::uint64_t n = 1;
      const double p = mean ? 1.0 / mean : 1.0;
      while (!rng.chance(p) && n < 64ull * mean) ++n;
      return n;
    }
  }
  return mean;
}

inline void text(Rng& rng, const GenConfig& cfg, std::uint64_t bytes, bool quoted, std::string& out) {
  const std::size_t start = out.size();
  while (out.size() - start < bytes) {
    if (quoted && rng.chance(cfg.embedded_rate)) {
      switch (rng.below(4)) {
        case 0: out += cfg.delimiter; break;
        case 1: out += '\n'; break;
        case 2: out += "\"\""; break;
        default: out += "\r\n"; break;
      }
      continue;
    }
    const auto& pool = cfg.multilingual ? kWorld : kAscii;
    out += pool[rng.below(std::size(pool))];
    if (out.size() - start < bytes) out += ' ';
  }
}

inline void number(Rng& rng, std::string& out, bool floating) {
  const std::int64_t v = static_cast<std::int64_t>(rng.below(2000000)) - 1000000;
  out += std::to_string(v);
  if (floating) {
    out += '.';
    out += std::to_string(rng.below(1000));
  }
}

}  // namespace gen_detail

/// Generates a corpus; every record has cfg.columns fields.
inline std::string generate(const GenConfig& cfg) {
  if (cfg.columns == 0) throw ConfigError("generator needs at least one column");
  gen_detail::Rng rng(cfg.seed);
  // 0 text, 1 int, 2 float
  std::vector<int> kinds(cfg.columns);
  for (auto& k : kinds) k = rng.chance(cfg.numeric_share) ? 1 + static_cast<int>(rng.below(2)) : 0;

  std::string out;
  out.reserve(cfg.target_bytes + cfg.skew_bytes + 1024);
  bool skew_done = cfg.skew_bytes == 0;
  const std::uint64_t skew_at = cfg.target_bytes / 2;
  while (out.size() < cfg.target_bytes + (skew_done ? 0 : cfg.skew_bytes)) {
    const bool giant = !skew_done && out.size() >= skew_at;
    for (std::uint32_t c = 0; c < cfg.columns; ++c) {
      if (c) out += cfg.delimiter;
      if (giant && c == 0) {
        out += '"';
        gen_detail::text(rng, cfg, cfg.skew_bytes, true, out);
        out += '"';
        continue;
      }
      if (rng.chance(cfg.empty_rate)) continue;
      if (kinds[c] != 0) {
        gen_detail::number(rng, out, kinds[c] == 2);
        continue;
      }
      const bool quoted = rng.chance(cfg.quote_density);
      if (quoted) out += '"';
      gen_detail::text(rng, cfg, gen_detail::draw_size(rng, cfg.field_size, cfg.mean_field_bytes), quoted, out);
      if (quoted) out += '"';
    }
    if (giant) skew_done = true;
    out += '\n';
  }
  if (!cfg.final_newline && !out.empty()) out.pop_back();
  return out;
}

/// Re-encodes UTF-8 text as UTF-16 (invalid sequences become U+FFFD).
inline std::vector<std::uint8_t> utf8_to_utf16(std::string_view s, EncodingId enc = EncodingId::utf16le) {
  if (enc != EncodingId::utf16le && enc != EncodingId::utf16be) throw ConfigError("utf8_to_utf16: not a UTF-16 encoding");
  std::vector<std::uint8_t> out;
  out.reserve(s.size() * 2);
  auto put = [&](std::uint16_t u) {
    if (enc == EncodingId::utf16le) {
      out.push_back(static_cast<std::uint8_t>(u));
      out.push_back(static_cast<std::uint8_t>(u >> 8));
    } else {
      out.push_back(static_cast<std::uint8_t>(u >> 8));
      out.push_back(static_cast<std::uint8_t>(u));
    }
  };
  for (std::size_t i = 0; i < s.size();) {
    const auto b = static_cast<std::uint8_t>(s[i]);
    std::uint32_t cp = 0xFFFD;
    std::size_t len = 1;
    if (b < 0x80) {
      cp = b;
    } else if ((b >> 5) == 0x6) {
      len = 2;
    } else if ((b >> 4) == 0xE) {
      len = 3;
    } else if ((b >> 3) == 0x1E) {
      len = 4;
    }
    if (len > 1) {
      if (i + len > s.size()) {
        len = 1;
      } else {
        cp = b & (0x7F >> len);
        for (std::size_t k = 1; k < len; ++k) {
          const auto c = static_cast<std::uint8_t>(s[i + k]);
          if ((c & 0xC0) != 0x80) {
            cp = 0xFFFD;
            len = 1;
            break;
          }
          cp = (cp << 6) | (c & 0x3F);
        }
      }
    }
    i += len;
    if (cp >= 0x10000) {
      cp -= 0x10000;
      put(static_cast<std::uint16_t>(0xD800 + (cp >> 10)));
      put(static_cast<std::uint16_t>(0xDC00 + (cp & 0x3FF)));
    } else {
      put(static_cast<std::uint16_t>(cp));
    }
  }
  return out;
}

}  // namespace dsvpar
