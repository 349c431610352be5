#pragma once

// Record and column positions. Each chunk contributes a record count and a
// column offset that is absolute once the chunk has seen a record delimiter
// and relative otherwise; scanning both yields every chunk's starting
// (record, column) position.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dsvpar/chunk_parse.hpp"
#include "dsvpar/scan.hpp"

namespace dsvpar {

inline std::uint64_t record_count(std::uint64_t rec_bidx) {
  return static_cast<std::uint64_t>(std::popcount(rec_bidx));
}

// All bits at or below the highest set bit of x (x != 0).
inline std::uint64_t mask_through_highest(std::uint64_t x) {
  const int hb = 63 - std::countl_zero(x);
  return hb == 63 ? ~std::uint64_t{0} : (std::uint64_t{1} << (hb + 1)) - 1;
}

/// Field delimiters after the chunk's last record delimiter (absolute), or
/// all of them when there is none (relative).
inline ColumnOffset chunk_column_offset(std::uint64_t rec_bidx, std::uint64_t col_bidx) {
  if (rec_bidx == 0) return ColumnOffset::rel(static_cast<std::uint64_t>(std::popcount(col_bidx)));
  return ColumnOffset::abs(static_cast<std::uint64_t>(std::popcount(~mask_through_highest(rec_bidx) & col_bidx)));
}

struct GlobalOffsets {
  std::vector<std::uint64_t> records;  // record index at each chunk's first byte
  std::vector<ColumnOffset> columns;   // column position at each chunk's first byte
  std::uint64_t record_total = 0;      // seed record + all record delimiters
  ColumnOffset column_end;             // column position after the last chunk
};

struct ChunkOffset {
  std::uint64_t records = 0;
  ColumnOffset column;
};

inline GlobalOffsets global_offsets(std::span<const ChunkOffset> per_chunk, std::uint64_t seed_record,
                                    ColumnOffset seed_column, WorkerPool& pool) {
  GlobalOffsets out;
  out.records.resize(per_chunk.size());
  out.columns.resize(per_chunk.size());
  pool.for_each_block(per_chunk.size(), kScanBlock, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out.records[i] = per_chunk[i].records;
      out.columns[i] = per_chunk[i].column;
    }
  });
  out.record_total = exclusive_scan_inplace(
      std::span<std::uint64_t>(out.records), [](std::uint64_t a, std::uint64_t b) { return a + b; },
      std::uint64_t{0}, seed_record, pool);
  out.column_end = exclusive_scan_inplace(std::span<ColumnOffset>(out.columns), combine_offset,
                                          ColumnOffset::rel(0), seed_column, pool);
  return out;
}

inline GlobalOffsets global_offsets(std::span<const ChunkOffset> per_chunk, std::uint64_t seed_record,
                                    ColumnOffset seed_column, std::size_t worker_budget) {
  WorkerPool pool(worker_budget);
  return global_offsets(per_chunk, seed_record, seed_column, pool);
}

// ---------------------------------------------------------------------------
// Column counts

inline constexpr std::uint32_t kUnsetMin = std::numeric_limits<std::uint32_t>::max();

struct ChunkColumnStats {
  std::uint32_t rel_minmax = 0;  // field delimiters before the first record delimiter
  std::uint32_t min_cols = kUnsetMin;
  std::uint32_t max_cols = 0;
  bool has_record_delim = false;

  bool has_minmax() const { return min_cols != kUnsetMin; }
};

/// Column counts of the records that both start and end inside the chunk.
/// A record's column count is the number of delimiters that close its fields.
inline ChunkColumnStats chunk_column_stats(std::uint64_t rec_bidx, std::uint64_t col_bidx) {
  ChunkColumnStats s;
  if (rec_bidx == 0) {
    s.rel_minmax = static_cast<std::uint32_t>(std::popcount(col_bidx));
    return s;
  }
  s.has_record_delim = true;
  int prev = std::countr_zero(rec_bidx);
  s.rel_minmax = static_cast<std::uint32_t>(std::popcount(col_bidx & ((std::uint64_t{1} << prev) - 1)));
  std::uint64_t rest = rec_bidx & (rec_bidx - 1);
  while (rest != 0) {
    const int cur = std::countr_zero(rest);
    const std::uint64_t upto = cur == 63 ? ~std::uint64_t{0} : (std::uint64_t{1} << (cur + 1)) - 1;
    const std::uint64_t after_prev = ~((std::uint64_t{1} << (prev + 1)) - 1);
    const auto cols = static_cast<std::uint32_t>(std::popcount(col_bidx & upto & after_prev));
    s.min_cols = std::min(s.min_cols, cols);
    s.max_cols = std::max(s.max_cols, cols);
    prev = cur;
    rest &= rest - 1;
  }
  return s;
}

struct ColumnCountStats {
  std::uint32_t min = kUnsetMin;
  std::uint32_t max = 0;

  bool any() const { return min != kUnsetMin; }
  void merge(std::uint32_t cols) {
    min = std::min(min, cols);
    max = std::max(max, cols);
  }
  void merge(const ColumnCountStats& o) {
    min = std::min(min, o.min);
    max = std::max(max, o.max);
  }
  friend bool operator==(const ColumnCountStats&, const ColumnCountStats&) = default;
};

/// Folds each chunk's first record (whose count needs the chunk's resolved
/// column offset) into its min/max and reduces over all chunks.
inline ColumnCountStats resolve_chunk_stats(const ChunkColumnStats& chunk, const ColumnOffset& offset) {
  ColumnCountStats s;
  if (!chunk.has_record_delim) return s;
  s.merge(static_cast<std::uint32_t>(offset.value + chunk.rel_minmax + 1));
  if (chunk.has_minmax()) {
    s.merge(chunk.min_cols);
    s.merge(chunk.max_cols);
  }
  return s;
}

inline ColumnCountStats column_count_stats(std::span<const ChunkColumnStats> chunks,
                                           std::span<const ColumnOffset> resolved_offsets) {
  ColumnCountStats total;
  for (std::size_t i = 0; i < chunks.size(); ++i) total.merge(resolve_chunk_stats(chunks[i], resolved_offsets[i]));
  return total;
}

struct ColumnValidation {
  struct Offender {
    std::size_t chunk = 0;
    std::uint64_t first_record = 0;  // first nonconforming record ending in this chunk
    std::uint32_t columns = 0;       // its column count
  };

  bool pass = true;
  std::uint32_t expected = 0;
  ColumnCountStats stats;
  std::string reason;  // "", "nonuniform" or "mismatch"
  std::vector<Offender> offenders;
};

inline ColumnValidation validate_column_count(const ColumnCountStats& stats, std::uint32_t expected) {
  ColumnValidation v;
  v.expected = expected;
  v.stats = stats;
  if (!stats.any()) return v;
  if (stats.min != stats.max) {
    v.pass = false;
    v.reason = "nonuniform";
  } else if (stats.min != expected) {
    v.pass = false;
    v.reason = "mismatch";
  }
  return v;
}

/// Per-chunk validation: also names the chunks holding nonconforming records
/// and the first such record in each.
inline ColumnValidation validate_column_count(std::span<const ChunkMeta> metas,
                                              std::span<const ColumnOffset> column_offsets,
                                              std::span<const std::uint64_t> record_offsets,
                                              std::uint32_t expected) {
  ColumnCountStats total;
  std::vector<ColumnValidation::Offender> offenders;
  for (std::size_t i = 0; i < metas.size(); ++i) {
    const auto& m = metas[i];
    if (m.rec_bidx == 0) continue;
    total.merge(resolve_chunk_stats(chunk_column_stats(m.rec_bidx, m.col_bidx), column_offsets[i]));
    std::uint64_t rest = m.rec_bidx;
    std::uint64_t record = record_offsets[i];
    std::uint64_t cols = column_offsets[i].value;
    int prev = -1;
    while (rest != 0) {
      const int cur = std::countr_zero(rest);
      const std::uint64_t upto = cur == 63 ? ~std::uint64_t{0} : (std::uint64_t{1} << (cur + 1)) - 1;
      const std::uint64_t after = prev < 0 ? ~std::uint64_t{0} : ~((std::uint64_t{1} << (prev + 1)) - 1);
      cols += static_cast<std::uint64_t>(std::popcount(m.col_bidx & upto & after));
      if (cols != expected) {
        offenders.push_back({i, record, static_cast<std::uint32_t>(cols)});
        break;
      }
      ++record;
      cols = 0;
      prev = cur;
      rest &= rest - 1;
    }
  }
  auto v = validate_column_count(total, expected);
  v.offenders = std::move(offenders);
  return v;
}

}  // namespace dsvpar
