#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dsvpar/dsvpar.hpp"

namespace dsvpar::testing {

inline std::vector<std::uint8_t> bytes(std::string_view s) { return {s.begin(), s.end()}; }

inline const Dialect& csv() {
  static const Dialect d(build_csv_dialect(',', '"', '\n'));
  return d;
}

/// Random inputs for differential runs. Mixes well-formed RFC 4180 records
/// (quoted fields with embedded delimiters and doubled quotes, empty fields,
/// ragged rows, with or without a final newline) and raw symbol soup, which
/// also covers malformed quoting.
class FuzzSource {
 public:
  explicit FuzzSource(std::uint64_t seed) : rng_(seed) {}

  std::uint64_t below(std::uint64_t n) { return n ? rng_() % n : 0; }
  bool chance(double p) { return static_cast<double>(rng_() >> 11) * 0x1.0p-53 < p; }
  std::mt19937_64& engine() { return rng_; }

  /// Size drawn log-uniformly from [0, max_bytes].
  std::size_t size(std::size_t max_bytes) {
    if (chance(0.02)) return 0;
    const double lg = std::log2(static_cast<double>(max_bytes) + 1);
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return std::min<std::size_t>(max_bytes, static_cast<std::size_t>(std::exp2(u * lg)) - 1);
  }

  std::string input(std::size_t max_bytes) {
    const std::size_t target = size(max_bytes);
    switch (below(8)) {
      case 0: return soup(target, "ab1,\"\n");
      case 1: return soup(target, "a,\"\n\r x2.5");
      default: return records(target);
    }
  }

  std::string soup(std::size_t n, std::string_view alphabet) {
    std::string s(n, ' ');
    for (auto& c : s) c = alphabet[below(alphabet.size())];
    return s;
  }

  /// Records up to `target` bytes. Records longer than `max_record` bytes are
  /// redrawn; `ragged` < 0 picks at random.
  std::string records(std::size_t target, std::size_t max_record = SIZE_MAX, int ragged = -1) {
    std::string s;
    const std::uint64_t columns = 1 + below(6);
    const bool is_ragged = ragged < 0 ? chance(0.3) : ragged > 0;
    const bool numeric = chance(0.5);
    std::string rec;
    while (s.size() < target) {
      const std::uint64_t cols = is_ragged ? 1 + below(columns + 1) : columns;
      rec.clear();
      for (std::uint64_t c = 0; c < cols; ++c) {
        if (c) rec += ',';
        field(rec, numeric && c % 2 == 0);
      }
      rec += '\n';
      if (rec.size() <= max_record) s += rec;
    }
    if (!s.empty() && chance(0.5)) s.pop_back();
    return s;
  }

  void field(std::string& s, bool numeric) {
    const auto kind = below(10);
    if (kind == 0) return;  // empty
    if (numeric && kind < 8) {
      if (chance(0.5)) {
        s += std::to_string(static_cast<std::int64_t>(below(20001)) - 10000);
      } else {
        s += std::to_string(static_cast<double>(below(100000)) / 100.0);
      }
      return;
    }
    if (kind < 6) {
      s += soup(1 + below(8), "abcxyz 019.-");
      return;
    }
    s += '"';
    const auto len = below(kind == 9 ? 200 : 12);
    for (std::uint64_t i = 0; i < len; ++i) {
      switch (below(10)) {
        case 0: s += ','; break;
        case 1: s += '\n'; break;
        case 2: s += "\"\""; break;
        default: s += static_cast<char>('a' + below(26)); break;
      }
    }
    s += '"';
  }

 private:
  std::mt19937_64 rng_;
};

/// A random DFA with `states` states (the last one absorbing and invalid) and
/// `groups` groups over distinct bytes 'a', 'b', ... plus a catch-all.
inline DfaSpec random_dfa(std::mt19937_64& rng, std::size_t states, std::size_t groups) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < states; ++i) names.push_back("s" + std::to_string(i));
  const auto invalid = static_cast<StateIndex>(states - 1);
  std::vector<SymbolGroup> gs;
  for (std::size_t g = 0; g + 1 < groups; ++g) gs.push_back({{static_cast<std::uint8_t>('a' + g)}, false});
  gs.push_back({{}, true});
  std::vector<StateIndex> transitions(groups * states);
  std::vector<EmissionAction> emissions(groups * states);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t s = 0; s < states; ++s) {
      transitions[g * states + s] = s == invalid ? invalid : static_cast<StateIndex>(rng() % states);
      const auto r = rng() % 4;
      emissions[g * states + s] = {r == 0, r <= 1, r <= 2};
    }
  }
  std::vector<StateIndex> accepting;
  for (std::size_t s = 0; s + 1 < states; ++s) {
    if (rng() % 2) accepting.push_back(static_cast<StateIndex>(s));
  }
  return DfaSpec(names, 0, accepting, invalid, gs, transitions, emissions);
}

/// Runs the parallel front half (bitmaps, offsets), tagging and partitioning
/// on a whole buffer.
struct CssRun {
  Structure structure;
  Css css;
  TaggedSymbols tagged;
};

inline CssRun css_for(std::span<const std::uint8_t> data, TaggingMode mode, std::size_t chunk_size,
                      std::size_t columns, WorkerPool& pool, const Selection* selection = nullptr) {
  static const Selection kNone;
  ParseOptions opt;
  opt.chunk_size = chunk_size;
  StageTimes times;
  CssRun run;
  run.structure = analyze(data, csv(), opt, csv().spec.start_state(), true, pool, times);
  const auto& s = run.structure;
  const Selection& sel = selection ? *selection : kNone;
  const auto map = sel.column_map(columns);
  TagInput in;
  in.data = data;
  in.metas = s.metas;
  in.record_offsets = s.record_offsets;
  in.column_offsets = s.column_offsets;
  in.chunk_size = chunk_size;
  in.limit = s.cut;
  in.terminated_records = s.terminated_records;
  in.close_trailing = s.trailing_record;
  in.trailing_column = s.trailing_column;
  in.selection = &sel;
  in.column_map = map;
  in.mode = mode;
  run.tagged = tag_symbols(in, 0, s.metas.size(), pool);
  const std::size_t out_columns = sel.columns ? sel.columns->size() : columns;
  run.css = partition_by_column(run.tagged, out_columns, mode, kDefaultTerminator, pool);
  return run;
}

inline std::string str(std::span<const std::uint8_t> s) { return {s.begin(), s.end()}; }

}  // namespace dsvpar::testing
