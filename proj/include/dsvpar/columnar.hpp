#pragma once

// From bitmaps to column-contiguous symbol sequences (CSS). Every data symbol
// is tagged with its column (and, in record-tag mode, its record); a stable
// counting partition on the column tag then lays each column's symbols out
// contiguously, and a per-column index of (offset, length, record) entries
// locates the individual fields.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dsvpar/chunk_parse.hpp"
#include "dsvpar/error.hpp"
#include "dsvpar/scan.hpp"

namespace dsvpar {

enum class TaggingMode : std::uint8_t { automatic, tagged, inline_terminated, vector_delimited };

constexpr std::string_view mode_name(TaggingMode m) {
  switch (m) {
    case TaggingMode::automatic: return "auto";
    case TaggingMode::tagged: return "tagged";
    case TaggingMode::inline_terminated: return "inline";
    case TaggingMode::vector_delimited: return "delimited";
  }
  return "auto";
}

inline std::optional<TaggingMode> parse_mode(std::string_view s) {
  if (s == "auto") return TaggingMode::automatic;
  if (s == "tagged") return TaggingMode::tagged;
  if (s == "inline") return TaggingMode::inline_terminated;
  if (s == "delimited" || s == "vector") return TaggingMode::vector_delimited;
  return std::nullopt;
}

inline constexpr std::uint8_t kDefaultTerminator = 0x1F;
inline constexpr std::int32_t kDropColumn = -1;

/// Which records and columns reach the output.
struct Selection {
  std::vector<std::uint64_t> skip_records;         // sorted, unique, global input record indices
  std::optional<std::vector<std::uint32_t>> columns;  // input column indices in output order

  std::uint64_t skipped_before(std::uint64_t record) const {
    return static_cast<std::uint64_t>(std::lower_bound(skip_records.begin(), skip_records.end(), record) -
                                      skip_records.begin());
  }
  bool skipped(std::uint64_t record) const {
    return std::binary_search(skip_records.begin(), skip_records.end(), record);
  }
  /// Output row of a kept record.
  std::uint64_t row_of(std::uint64_t record) const { return record - skipped_before(record); }

  /// Input record of output row `row` (inverse of row_of).
  std::uint64_t record_of_row(std::uint64_t row) const {
    std::uint64_t r = row;
    for (;;) {
      const std::uint64_t next = row + skipped_before(r + 1);
      if (next == r) return r;
      r = next;
    }
  }

  /// Map from input column to output column for `input_columns` columns.
  std::vector<std::int32_t> column_map(std::size_t input_columns) const {
    std::vector<std::int32_t> map(input_columns, kDropColumn);
    if (!columns) {
      for (std::size_t c = 0; c < input_columns; ++c) map[c] = static_cast<std::int32_t>(c);
      return map;
    }
    for (std::size_t out = 0; out < columns->size(); ++out) {
      const std::uint32_t in = (*columns)[out];
      if (in < input_columns) map[in] = static_cast<std::int32_t>(out);
    }
    return map;
  }
};

// ---------------------------------------------------------------------------
// Tagging

/// Structure of arrays; record tags only in record-tag mode and delimiter
/// flags only in vector-delimited mode.
struct TaggedSymbols {
  std::vector<std::uint8_t> symbols;
  std::vector<std::uint32_t> column_tags;
  std::vector<std::uint64_t> record_tags;
  std::vector<std::uint8_t> delimiter_flags;
  std::uint64_t irrelevant = 0;  // data symbols of skipped records or columns
};

/// Everything tag_symbols needs about one parsed partition.
struct TagInput {
  std::span<const std::uint8_t> data;
  std::span<const ChunkMeta> metas;
  std::span<const std::uint64_t> record_offsets;  // partition-local record index at each chunk start
  std::span<const ColumnOffset> column_offsets;
  std::size_t chunk_size = kDefaultChunkSize;
  std::size_t limit = 0;              // bytes at or after this position are not tagged
  std::uint64_t terminated_records = 0;
  bool close_trailing = false;        // the bytes after the last record delimiter form a record
  ColumnOffset trailing_column;       // column position at `limit`

  std::uint64_t record_base = 0;      // global index of local record 0
  std::uint64_t row_base = 0;         // output row of the first kept record at or after record_base
  std::uint64_t valid_records = ~std::uint64_t{0};  // local records at or past this are dropped
  const Selection* selection = nullptr;
  std::span<const std::int32_t> column_map;  // input column -> output column or kDropColumn

  TaggingMode mode = TaggingMode::tagged;
  std::uint8_t terminator = kDefaultTerminator;
};

namespace detail {

// Walks chunk `i` and reports every tagged item to `out(column, row, byte, is_delimiter)`.
// Returns the number of irrelevant data symbols.
template <class Out>
std::uint64_t walk_chunk(const TagInput& in, std::size_t i, Out&& out) {
  const ChunkMeta& m = in.metas[i];
  const std::size_t pos0 = i * in.chunk_size;
  const std::size_t len = std::min<std::size_t>(m.length, in.limit > pos0 ? in.limit - pos0 : 0);
  std::uint64_t record = in.record_offsets[i];
  std::uint64_t column = in.column_offsets[i].value;
  std::uint64_t irrelevant = 0;

  bool keep = false;
  std::uint64_t row = 0;
  auto refresh = [&] {
    const std::uint64_t global = in.record_base + record;
    keep = record < in.valid_records && !(in.selection && in.selection->skipped(global));
    if (keep) row = (in.selection ? in.selection->row_of(global) : global) - in.row_base;
  };
  refresh();

  const bool closes = in.mode != TaggingMode::tagged;
  for (std::size_t j = 0; j < len; ++j) {
    const std::uint64_t bit = std::uint64_t{1} << j;
    const std::uint8_t byte = in.data[pos0 + j];
    if (m.ctl_bidx & bit) {
      if (m.col_bidx & bit) {
        if (closes && keep && column < in.column_map.size() && in.column_map[column] != kDropColumn) {
          out(static_cast<std::uint32_t>(in.column_map[column]), row, byte, true);
        }
        ++column;
      }
      if (m.rec_bidx & bit) {
        ++record;
        column = 0;
        refresh();
      }
    } else if (keep && column < in.column_map.size() && in.column_map[column] != kDropColumn) {
      out(static_cast<std::uint32_t>(in.column_map[column]), row, byte, false);
    } else {
      ++irrelevant;
    }
  }
  return irrelevant;
}

}  // namespace detail

/// True if any data byte before `limit` equals `terminator`.
inline bool terminator_in_data(std::span<const std::uint8_t> data, std::span<const ChunkMeta> metas,
                               std::size_t chunk_size, std::size_t limit, std::uint8_t terminator,
                               WorkerPool& pool) {
  std::vector<std::uint8_t> hit((metas.size() + kScanBlock - 1) / kScanBlock, 0);
  pool.for_each_block(metas.size(), kScanBlock, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t pos0 = i * chunk_size;
      const std::size_t len = std::min<std::size_t>(metas[i].length, limit > pos0 ? limit - pos0 : 0);
      for (std::size_t j = 0; j < len; ++j) {
        if (data[pos0 + j] == terminator && !(metas[i].ctl_bidx >> j & 1)) {
          hit[begin / kScanBlock] = 1;
          return;
        }
      }
    }
  });
  return std::find(hit.begin(), hit.end(), 1) != hit.end();
}

/// Tags chunks [first, last). When `last` is the final chunk and the
/// partition has a trailing record, its open field is closed as well.
inline TaggedSymbols tag_symbols(const TagInput& in, std::size_t first, std::size_t last, WorkerPool& pool) {
  const std::size_t n = last - first;
  const bool with_trailer = in.close_trailing && last == in.metas.size() && in.mode != TaggingMode::tagged;

  // The trailing record's last field has no delimiter; synthesize its close.
  std::optional<std::uint32_t> trailer_column;
  std::uint64_t trailer_row = 0;
  if (with_trailer) {
    const std::uint64_t local = in.terminated_records;
    const std::uint64_t global = in.record_base + local;
    const bool keep = local < in.valid_records && !(in.selection && in.selection->skipped(global));
    const std::uint64_t col = in.trailing_column.value;
    if (keep && col < in.column_map.size() && in.column_map[col] != kDropColumn) {
      trailer_column = static_cast<std::uint32_t>(in.column_map[col]);
      trailer_row = (in.selection ? in.selection->row_of(global) : global) - in.row_base;
    }
  }

  std::vector<std::uint64_t> counts(n + 1, 0);
  std::vector<std::uint64_t> irrelevant(n, 0);
  std::vector<std::uint8_t> bad_terminator(n, 0);
  const bool inline_mode = in.mode == TaggingMode::inline_terminated;
  pool.for_each_block(n, 256, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      std::uint64_t c = 0;
      bool bad = false;
      irrelevant[k] = detail::walk_chunk(in, first + k, [&](std::uint32_t, std::uint64_t, std::uint8_t b, bool delim) {
        ++c;
        if (inline_mode && !delim && b == in.terminator) bad = true;
      });
      counts[k] = c;
      bad_terminator[k] = bad;
    }
  });
  if (std::find(bad_terminator.begin(), bad_terminator.end(), 1) != bad_terminator.end()) {
    throw ModeError("terminator byte occurs inside field data; use the delimited tagging mode");
  }
  counts[n] = trailer_column ? 1 : 0;
  const std::uint64_t total = exclusive_scan_inplace(
      std::span<std::uint64_t>(counts), [](std::uint64_t a, std::uint64_t b) { return a + b; }, std::uint64_t{0},
      pool);

  TaggedSymbols out;
  out.symbols.resize(total);
  out.column_tags.resize(total);
  if (in.mode == TaggingMode::tagged) out.record_tags.resize(total);
  if (in.mode == TaggingMode::vector_delimited) out.delimiter_flags.resize(total);
  for (auto x : irrelevant) out.irrelevant += x;

  auto put = [&](std::uint64_t at, std::uint32_t col, std::uint64_t row, std::uint8_t b, bool delim) {
    out.symbols[at] = delim && inline_mode ? in.terminator : b;
    out.column_tags[at] = col;
    if (!out.record_tags.empty()) out.record_tags[at] = row;
    if (!out.delimiter_flags.empty()) out.delimiter_flags[at] = delim ? 1 : 0;
  };
  pool.for_each_block(n, 256, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      std::uint64_t at = counts[k];
      detail::walk_chunk(in, first + k, [&](std::uint32_t col, std::uint64_t row, std::uint8_t b, bool delim) {
        put(at++, col, row, b, delim);
      });
    }
  });
  if (trailer_column) put(counts[n], *trailer_column, trailer_row, in.terminator, true);
  return out;
}

// ---------------------------------------------------------------------------
// Partitioning

struct Css {
  TaggingMode mode = TaggingMode::tagged;
  std::uint8_t terminator = kDefaultTerminator;
  std::vector<std::uint64_t> column_histogram;  // symbols per column
  std::vector<std::uint64_t> column_begin;      // column c occupies [column_begin[c], column_begin[c+1])
  std::vector<std::uint8_t> symbols;
  std::vector<std::uint64_t> record_tags;
  std::vector<std::uint8_t> delimiter_flags;

  std::size_t column_count() const { return column_histogram.size(); }

  template <class T>
  static std::span<const T> region(const std::vector<T>& v, const std::vector<std::uint64_t>& begin, std::size_t c) {
    if (v.empty()) return {};
    return {v.data() + begin[c], begin[c + 1] - begin[c]};
  }
  std::span<const std::uint8_t> column_symbols(std::size_t c) const { return region(symbols, column_begin, c); }
  std::span<const std::uint64_t> column_records(std::size_t c) const { return region(record_tags, column_begin, c); }
  std::span<const std::uint8_t> column_delimiters(std::size_t c) const {
    return region(delimiter_flags, column_begin, c);
  }
};

inline constexpr std::size_t kPartitionBlock = 1 << 16;

/// Stable counting partition by column tag: per-block histograms, an
/// exclusive scan over them in column-major order, then a scatter.
inline Css partition_by_column(const TaggedSymbols& tagged, std::size_t column_count, TaggingMode mode,
                               std::uint8_t terminator, WorkerPool& pool) {
  const std::size_t n = tagged.symbols.size();
  const std::size_t blocks = (n + kPartitionBlock - 1) / kPartitionBlock;
  std::vector<std::uint64_t> hist(blocks * column_count, 0);  // [column][block]
  pool.parallel_for(blocks, [&](std::size_t b) {
    const std::size_t end = std::min(n, (b + 1) * kPartitionBlock);
    for (std::size_t i = b * kPartitionBlock; i < end; ++i) ++hist[tagged.column_tags[i] * blocks + b];
  });

  Css css;
  css.mode = mode;
  css.terminator = terminator;
  css.column_histogram.assign(column_count, 0);
  for (std::size_t c = 0; c < column_count; ++c) {
    for (std::size_t b = 0; b < blocks; ++b) css.column_histogram[c] += hist[c * blocks + b];
  }
  exclusive_scan_inplace(
      std::span<std::uint64_t>(hist), [](std::uint64_t a, std::uint64_t b) { return a + b; }, std::uint64_t{0},
      pool);
  css.column_begin.resize(column_count + 1);
  for (std::size_t c = 0; c < column_count; ++c) css.column_begin[c] = blocks ? hist[c * blocks] : 0;
  css.column_begin[column_count] = n;
  if (blocks == 0) std::fill(css.column_begin.begin(), css.column_begin.end(), 0);

  css.symbols.resize(n);
  const bool with_records = !tagged.record_tags.empty();
  const bool with_flags = !tagged.delimiter_flags.empty();
  if (with_records) css.record_tags.resize(n);
  if (with_flags) css.delimiter_flags.resize(n);
  pool.parallel_for(blocks, [&](std::size_t b) {
    std::vector<std::uint64_t> cursor(column_count);
    for (std::size_t c = 0; c < column_count; ++c) cursor[c] = hist[c * blocks + b];
    const std::size_t end = std::min(n, (b + 1) * kPartitionBlock);
    for (std::size_t i = b * kPartitionBlock; i < end; ++i) {
      const std::uint64_t at = cursor[tagged.column_tags[i]]++;
      css.symbols[at] = tagged.symbols[i];
      if (with_records) css.record_tags[at] = tagged.record_tags[i];
      if (with_flags) css.delimiter_flags[at] = tagged.delimiter_flags[i];
    }
  });
  return css;
}

// ---------------------------------------------------------------------------
// Field indexes

/// A field of a compacted column: `length` data symbols starting at `offset`.
struct FieldRef {
  std::uint64_t offset = 0;
  std::uint32_t length = 0;

  friend bool operator==(const FieldRef&, const FieldRef&) = default;
};

/// One column's data symbols with terminators and delimiters removed, plus
/// the end offset of every row's field. Fields are contiguous, so field i
/// spans [ends[i-1], ends[i]). Builds incrementally across windows of a
/// partition.
class ColumnCssBuilder {
 public:
  std::vector<std::uint8_t> data;
  std::vector<std::uint64_t> ends;

  std::size_t field_count() const { return ends.size(); }
  FieldRef field(std::size_t i) const {
    const std::uint64_t begin = i ? ends[i - 1] : 0;
    return {begin, static_cast<std::uint32_t>(ends[i] - begin)};
  }

  /// Record-tag mode: runs of equal record tags form fields; rows with no
  /// symbols get zero-length fields.
  void append_tagged(std::span<const std::uint8_t> symbols, std::span<const std::uint64_t> rows) {
    std::size_t i = 0;
    while (i < symbols.size()) {
      const std::uint64_t row = rows[i];
      std::size_t j = i + 1;
      while (j < symbols.size() && rows[j] == row) ++j;
      pad_to(row);
      if (ends.size() == row) ends.push_back(data.size());
      extend(symbols.subspan(i, j - i));
      i = j;
    }
  }

  /// Inline mode: every terminator ends a field.
  void append_terminated(std::span<const std::uint8_t> symbols, std::uint8_t terminator) {
    std::size_t i = 0;
    while (i < symbols.size()) {
      const auto* hit = static_cast<const std::uint8_t*>(std::memchr(symbols.data() + i, terminator, symbols.size() - i));
      const std::size_t j = hit ? static_cast<std::size_t>(hit - symbols.data()) : symbols.size();
      if (j > i) {
        open_field();
        extend(symbols.subspan(i, j - i));
      }
      if (hit) {
        open_field();
        open_ = false;
        i = j + 1;
      } else {
        i = j;
      }
    }
  }

  /// Vector-delimited mode: flagged symbols end a field and are not data.
  void append_delimited(std::span<const std::uint8_t> symbols, std::span<const std::uint8_t> flags) {
    std::size_t i = 0;
    while (i < symbols.size()) {
      std::size_t j = i;
      while (j < symbols.size() && !flags[j]) ++j;
      if (j > i) {
        open_field();
        extend(symbols.subspan(i, j - i));
      }
      if (j < symbols.size()) {
        open_field();
        open_ = false;
        i = j + 1;
      } else {
        i = j;
      }
    }
  }

  void append(const Css& css, std::size_t column) {
    switch (css.mode) {
      case TaggingMode::tagged:
        append_tagged(css.column_symbols(column), css.column_records(column));
        break;
      case TaggingMode::inline_terminated:
        append_terminated(css.column_symbols(column), css.terminator);
        break;
      case TaggingMode::vector_delimited:
        append_delimited(css.column_symbols(column), css.column_delimiters(column));
        break;
      case TaggingMode::automatic:
        throw ConfigError("automatic tagging mode must be resolved before indexing");
    }
  }

  /// Pads with zero-length fields up to `rows`.
  void finish(std::uint64_t rows) {
    open_ = false;
    if (ends.size() > rows) throw Error("column index holds more fields than rows");
    pad_to(rows);
  }

 private:
  void pad_to(std::uint64_t rows) {
    if (ends.size() < rows) ends.resize(rows, data.size());
  }
  void open_field() {
    if (!open_) {
      ends.push_back(data.size());
      open_ = true;
    }
  }
  // Grows the last field, which always ends at data.size().
  void extend(std::span<const std::uint8_t> bytes) {
    const std::uint64_t begin = ends.size() > 1 ? ends[ends.size() - 2] : 0;
    if (data.size() + bytes.size() - begin > 0xFFFFFFFFu) throw DataError("field longer than 4 GiB");
    data.insert(data.end(), bytes.begin(), bytes.end());
    ends.back() = data.size();
  }

  bool open_ = false;
};

struct FieldEntry {
  std::uint64_t offset = 0;
  std::uint32_t length = 0;
  std::uint64_t record = 0;

  friend bool operator==(const FieldEntry&, const FieldEntry&) = default;
};

/// Per column, one entry per field. Offsets count data symbols only, so all
/// three tagging modes index the same input identically.
struct CssIndex {
  std::vector<std::vector<FieldEntry>> columns;

  friend bool operator==(const CssIndex&, const CssIndex&) = default;
};

/// Indexes every column of `css`. With `rows` set, each column is padded to
/// that many zero-length fields.
inline CssIndex build_css_index(const Css& css, std::optional<std::uint64_t> rows, WorkerPool& pool) {
  CssIndex index;
  index.columns.resize(css.column_count());
  pool.parallel_for(css.column_count(), [&](std::size_t c) {
    ColumnCssBuilder b;
    b.append(css, c);
    if (rows) b.finish(*rows);
    auto& out = index.columns[c];
    out.reserve(b.field_count());
    for (std::size_t i = 0; i < b.field_count(); ++i) {
      const FieldRef f = b.field(i);
      out.push_back({f.offset, f.length, i});
    }
  });
  return index;
}

inline CssIndex build_css_index(const Css& css, std::optional<std::uint64_t> rows = std::nullopt) {
  WorkerPool pool(1);
  return build_css_index(css, rows, pool);
}

// ---------------------------------------------------------------------------
// Row pruning

/// Removes the raw lines listed in `skip_rows` (sorted global row indices;
/// row k ends with the k-th line feed). `first_row` is the row number of the
/// first byte of `input`; the returned count is the row number after it.
inline std::vector<std::uint8_t> prune_rows(std::span<const std::uint8_t> input, EncodingId enc,
                                            std::span<const std::uint64_t> skip_rows, std::uint64_t first_row,
                                            std::uint64_t& next_row, WorkerPool& pool) {
  const std::size_t unit = unit_size(enc);
  const std::size_t units = input.size() / unit;
  auto is_lf = [&](std::size_t u) {
    return unit == 1 ? input[u] == '\n' : load_unit16(input.data() + u * 2, enc) == 0x000A;
  };
  constexpr std::size_t kBlock = 1 << 16;
  const std::size_t blocks = (units + kBlock - 1) / kBlock;
  std::vector<std::uint64_t> rows_at(blocks + 1, 0);
  pool.parallel_for(blocks, [&](std::size_t b) {
    std::uint64_t n = 0;
    for (std::size_t u = b * kBlock, e = std::min(units, (b + 1) * kBlock); u < e; ++u) n += is_lf(u);
    rows_at[b] = n;
  });
  next_row = exclusive_scan_inplace(
      std::span<std::uint64_t>(rows_at.data(), blocks), [](std::uint64_t a, std::uint64_t b) { return a + b; },
      std::uint64_t{0}, first_row, pool);

  auto skipped = [&](std::uint64_t row) { return std::binary_search(skip_rows.begin(), skip_rows.end(), row); };
  std::vector<std::uint64_t> kept(blocks + 1, 0);
  pool.parallel_for(blocks, [&](std::size_t b) {
    std::uint64_t row = rows_at[b], n = 0;
    for (std::size_t u = b * kBlock, e = std::min(units, (b + 1) * kBlock); u < e; ++u) {
      if (!skipped(row)) ++n;
      row += is_lf(u);
    }
    kept[b] = n * unit;
  });
  const std::uint64_t tail = input.size() - units * unit;  // odd trailing byte of UTF-16 input
  const std::uint64_t total = exclusive_scan_inplace(
      std::span<std::uint64_t>(kept.data(), blocks), [](std::uint64_t a, std::uint64_t b) { return a + b; },
      std::uint64_t{0}, pool);
  std::vector<std::uint8_t> out(total + (skipped(next_row) ? 0 : tail));
  pool.parallel_for(blocks, [&](std::size_t b) {
    std::uint64_t row = rows_at[b];
    std::uint8_t* dst = out.data() + kept[b];
    for (std::size_t u = b * kBlock, e = std::min(units, (b + 1) * kBlock); u < e; ++u) {
      if (!skipped(row)) {
        std::memcpy(dst, input.data() + u * unit, unit);
        dst += unit;
      }
      row += is_lf(u);
    }
  });
  if (out.size() > total) out[total] = input.back();
  return out;
}

inline std::vector<std::uint8_t> prune_rows(std::span<const std::uint8_t> input, EncodingId enc,
                                            std::span<const std::uint64_t> skip_rows, WorkerPool& pool) {
  std::uint64_t next = 0;
  return prune_rows(input, enc, skip_rows, 0, next, pool);
}

}  // namespace dsvpar
