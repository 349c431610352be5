#pragma once

// Parsing one contiguous buffer: chunk simulation, context scan, bitmaps,
// offsets, tagging, partitioning and conversion. A buffer is either final
// (everything in it is parsed) or not (only complete records are parsed and
// the rest is handed back as carry-over).

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsvpar/chunk_parse.hpp"
#include "dsvpar/columnar.hpp"
#include "dsvpar/container.hpp"
#include "dsvpar/error.hpp"
#include "dsvpar/offsets.hpp"
#include "dsvpar/scan.hpp"
#include "dsvpar/typeconv.hpp"

namespace dsvpar {

struct ParseOptions {
  EncodingId encoding = EncodingId::ascii;
  std::size_t chunk_size = kDefaultChunkSize;
  TaggingMode mode = TaggingMode::automatic;
  std::uint8_t terminator = kDefaultTerminator;
  std::size_t workers = 1;
  bool strict = false;
  Selection selection;
  std::vector<std::uint64_t> skip_rows;  // sorted raw line numbers
  std::size_t big_field_threshold = 4096;
  std::size_t window_bytes = std::size_t{1} << 20;  // bytes tagged and partitioned at a time
};

inline void validate_options(const ParseOptions& o) {
  if (o.chunk_size < 1 || o.chunk_size > kMaxChunkSize) throw ConfigError("chunk size must be in [1, 64]");
  if (unit_size(o.encoding) == 2 && o.chunk_size % 2 != 0) {
    throw ConfigError("chunk size must be even for UTF-16 input");
  }
  if (o.workers < 1) throw ConfigError("worker count must be at least 1");
  if (!std::is_sorted(o.selection.skip_records.begin(), o.selection.skip_records.end()) ||
      std::adjacent_find(o.selection.skip_records.begin(), o.selection.skip_records.end()) !=
          o.selection.skip_records.end()) {
    throw ConfigError("skipped records must be sorted and unique");
  }
  if (!std::is_sorted(o.skip_rows.begin(), o.skip_rows.end())) throw ConfigError("skipped rows must be sorted");
  if (o.selection.columns) {
    auto cols = *o.selection.columns;
    std::sort(cols.begin(), cols.end());
    if (std::adjacent_find(cols.begin(), cols.end()) != cols.end()) throw ConfigError("projected columns repeat");
  }
}

struct StageTimes {
  double read = 0, parse = 0, scan = 0, tag = 0, partition = 0, convert = 0, write = 0, wall = 0;

  StageTimes& operator+=(const StageTimes& o) {
    read += o.read;
    parse += o.parse;
    scan += o.scan;
    tag += o.tag;
    partition += o.partition;
    convert += o.convert;
    write += o.write;
    return *this;
  }
};

class StageTimer {
 public:
  explicit StageTimer(double& slot) : slot_(slot), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() { slot_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  double& slot_;
  std::chrono::steady_clock::time_point start_;
};

struct Diagnostics {
  std::uint64_t records = 0;          // input records, including skipped and invalid ones
  std::uint64_t invalid_records = 0;  // records nulled after an invalid transition
  std::optional<std::uint64_t> first_invalid_offset;
  std::uint64_t conversion_errors = 0;
  std::uint64_t irrelevant_symbols = 0;
  ColumnCountStats column_stats;
  TaggingMode mode_used = TaggingMode::automatic;

  void merge(const Diagnostics& o) {
    records += o.records;
    invalid_records += o.invalid_records;
    if (!first_invalid_offset) first_invalid_offset = o.first_invalid_offset;
    conversion_errors += o.conversion_errors;
    irrelevant_symbols += o.irrelevant_symbols;
    column_stats.merge(o.column_stats);
    if (o.mode_used != TaggingMode::automatic) mode_used = o.mode_used;
  }
};

/// State threaded from one partition to the next.
struct PartitionContext {
  StateIndex seed_state = 0;
  std::uint64_t record_offset = 0;                   // global index of the partition's first record
  ColumnOffset column_offset = ColumnOffset::abs(0); // partitions start at record boundaries
  std::vector<std::uint8_t> carry_over;
  std::uint64_t byte_offset = 0;                     // input offset of the partition's first byte
  bool invalid = false;                              // an earlier partition hit the invalid state
  ColumnCountStats column_stats;                     // over all earlier partitions

  static PartitionContext initial(const DfaSpec& spec) {
    PartitionContext c;
    c.seed_state = spec.start_state();
    return c;
  }
};

/// Bitmaps and offsets of one buffer.
struct Structure {
  std::vector<ChunkMeta> metas;
  std::vector<std::uint64_t> record_offsets;
  std::vector<ColumnOffset> column_offsets;
  std::size_t cut = 0;                   // end of the last complete record (final: buffer size)
  std::uint64_t terminated_records = 0;  // records closed by a record delimiter before `cut`
  bool trailing_record = false;          // final buffers only
  ColumnOffset trailing_column;
  StateIndex state_at_cut = 0;
  ColumnCountStats stats;
  std::optional<std::size_t> first_invalid;   // byte position
  std::uint64_t invalid_from = ~std::uint64_t{0};  // first local record affected

  std::uint64_t records() const { return terminated_records + (trailing_record ? 1 : 0); }
};

inline Structure analyze(std::span<const std::uint8_t> data, const Dialect& dialect, const ParseOptions& opt,
                         StateIndex seed, bool final, WorkerPool& pool, StageTimes& times) {
  const std::size_t cs = opt.chunk_size;
  const std::size_t n = data.size();
  const std::size_t chunks = (n + cs - 1) / cs;
  const DfaSpec& spec = dialect.spec;
  auto chunk = [&](std::size_t i) { return data.subspan(i * cs, std::min(cs, n - i * cs)); };
  constexpr std::size_t kChunkBlock = 1024;

  Structure s;
  ResolvedStates resolved;
  {
    std::vector<StateTransitionVector> stvs(chunks);
    {
      StageTimer t(times.parse);
      pool.for_each_block(chunks, kChunkBlock, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
          stvs[i] = simulate_chunk_all_states(chunk(i), spec, dialect.matcher, opt.encoding);
        }
      });
    }
    StageTimer t(times.scan);
    resolved = resolve_start_states(std::move(stvs), seed, spec.state_count(), pool);
  }
  {
    StageTimer t(times.parse);
    s.metas.resize(chunks);
    pool.for_each_block(chunks, kChunkBlock, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        s.metas[i] = emit_bitmaps(chunk(i), spec, dialect.matcher, resolved.start_states[i], opt.encoding);
      }
    });
    resolved.start_states = {};
  }

  StageTimer t(times.scan);
  std::vector<ChunkOffset> per_chunk(chunks);
  pool.for_each_block(chunks, kChunkBlock, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      per_chunk[i] = {record_count(s.metas[i].rec_bidx), chunk_column_offset(s.metas[i].rec_bidx, s.metas[i].col_bidx)};
    }
  });
  auto offsets = global_offsets(per_chunk, 0, ColumnOffset::abs(0), pool);
  per_chunk = {};
  s.record_offsets = std::move(offsets.records);
  s.column_offsets = std::move(offsets.columns);
  s.terminated_records = offsets.record_total;

  // Last record delimiter: highest chunk with a record bit.
  const std::size_t blocks = (chunks + kChunkBlock - 1) / kChunkBlock;
  std::vector<std::size_t> last_in_block(blocks, ~std::size_t{0});
  std::vector<ColumnCountStats> block_stats(blocks);
  std::vector<std::size_t> invalid_in_block(blocks, ~std::size_t{0});
  pool.parallel_for(blocks, [&](std::size_t b) {
    for (std::size_t i = b * kChunkBlock, e = std::min(chunks, (b + 1) * kChunkBlock); i < e; ++i) {
      const auto& m = s.metas[i];
      if (m.rec_bidx) {
        last_in_block[b] = i;
        block_stats[b].merge(resolve_chunk_stats(chunk_column_stats(m.rec_bidx, m.col_bidx), s.column_offsets[i]));
      }
      if (m.first_invalid != kNoPosition && invalid_in_block[b] == ~std::size_t{0}) {
        invalid_in_block[b] = i * cs + m.first_invalid;
      }
    }
  });
  std::optional<std::size_t> last_chunk;
  for (std::size_t b = blocks; b-- > 0;) {
    if (last_in_block[b] != ~std::size_t{0}) {
      last_chunk = last_in_block[b];
      break;
    }
  }
  for (const auto& bs : block_stats) s.stats.merge(bs);

  const std::size_t unit = unit_size(opt.encoding);
  if (last_chunk) {
    const auto& m = s.metas[*last_chunk];
    s.cut = *last_chunk * cs + static_cast<std::size_t>(63 - std::countl_zero(m.rec_bidx)) + unit;
    s.state_at_cut = m.state_after_last_record;
  } else {
    s.cut = 0;
    s.state_at_cut = seed;
  }

  std::size_t limit = s.cut;
  if (final) {
    limit = n;
    s.trailing_record = s.cut < n;
    s.trailing_column = offsets.column_end;
    if (s.trailing_record) s.stats.merge(static_cast<std::uint32_t>(s.trailing_column.value + 1));
    s.cut = n;
  }

  for (auto pos : invalid_in_block) {
    if (pos < limit) {
      s.first_invalid = pos;
      break;
    }
  }
  if (final && !s.first_invalid && !spec.is_accepting(resolved.end_state)) s.first_invalid = n;
  if (s.first_invalid) {
    const std::size_t pos = *s.first_invalid;
    const std::size_t i = pos / cs;
    if (i < chunks) {
      const std::uint64_t below = (std::uint64_t{1} << (pos % cs)) - 1;
      s.invalid_from = s.record_offsets[i] + record_count(s.metas[i].rec_bidx & below);
    } else {
      s.invalid_from = s.terminated_records;
    }
  }
  return s;
}

/// Column-count validation of a whole buffer, naming the first nonconforming
/// record of every chunk that holds one (the unterminated last record counts).
inline ColumnValidation check_column_count(std::span<const std::uint8_t> data, const Dialect& dialect,
                                          const ParseOptions& opt, std::uint32_t expected, WorkerPool& pool) {
  StageTimes times;
  const Structure s = analyze(data, dialect, opt, dialect.spec.start_state(), true, pool, times);
  auto v = validate_column_count(s.metas, s.column_offsets, s.record_offsets, expected);
  if (s.trailing_record) {
    const auto cols = static_cast<std::uint32_t>(s.trailing_column.value + 1);
    auto stats = v.stats;
    stats.merge(cols);
    auto offenders = std::move(v.offenders);
    if (cols != expected) offenders.push_back({s.metas.size() - 1, s.terminated_records, cols});
    v = validate_column_count(stats, expected);
    v.offenders = std::move(offenders);
  }
  return v;
}

/// Resolves the automatic mode and rejects explicit modes the input cannot use.
inline TaggingMode choose_mode(TaggingMode requested, const ColumnCountStats& stats, bool terminator_found) {
  const bool uniform = !stats.any() || stats.min == stats.max;
  switch (requested) {
    case TaggingMode::automatic:
      if (!uniform) return TaggingMode::tagged;
      return terminator_found ? TaggingMode::vector_delimited : TaggingMode::inline_terminated;
    case TaggingMode::inline_terminated:
      if (terminator_found) {
        throw ModeError("terminator byte occurs inside field data; use the delimited tagging mode");
      }
      [[fallthrough]];
    case TaggingMode::vector_delimited:
      if (!uniform) {
        throw ModeError("records have between " + std::to_string(stats.min) + " and " + std::to_string(stats.max) +
                        " columns; the " + std::string(mode_name(requested)) +
                        " mode needs a uniform column count, use the tagged mode");
      }
      return requested;
    case TaggingMode::tagged:
      return requested;
  }
  return requested;
}

/// Result of parsing one buffer.
struct PartitionOutput {
  Table table;
  Diagnostics diag;
  std::vector<InferState> inferred;  // per input column (inference-only runs)
  std::size_t cut = 0;               // bytes consumed; the rest is carry-over
  StageTimes times;
};

/// What the parse should produce.
struct SchemaPlan {
  std::optional<Schema> schema;  // input columns; inferred from this buffer when absent
  bool infer_only = false;       // only gather InferStates and column counts
};

/// Parses `data` (carry-over followed by new input) under `ctx`. Returns the
/// batch of complete records and advances `ctx`; the caller carries
/// data[cut..] into the next partition.
inline PartitionOutput parse_partition_buffer(PartitionContext& ctx, std::span<const std::uint8_t> data, bool final,
                                              const Dialect& dialect, const SchemaPlan& plan,
                                              const ParseOptions& opt, WorkerPool& pool) {
  PartitionOutput out;
  StageTimes& times = out.times;
  const EncodingId enc = opt.encoding;
  if (final && unit_size(enc) == 2 && data.size() % 2 != 0) {
    throw DataError("UTF-16 input has an odd number of bytes", ctx.byte_offset + data.size());
  }

  Structure s = analyze(data, dialect, opt, ctx.seed_state, final, pool, times);
  if (ctx.invalid) {
    s.invalid_from = 0;
    if (!s.first_invalid) s.first_invalid = 0;
  }
  const std::uint64_t records = s.records();
  Diagnostics& diag = out.diag;
  diag.records = records;
  diag.column_stats = s.stats;
  if (s.first_invalid && !ctx.invalid) diag.first_invalid_offset = ctx.byte_offset + *s.first_invalid;
  const std::uint64_t invalid_from = std::min(s.invalid_from, records);
  diag.invalid_records = records - invalid_from;
  if (opt.strict && s.first_invalid && !ctx.invalid) {
    throw DataError("invalid input at byte " + std::to_string(ctx.byte_offset + *s.first_invalid) + " (record " +
                        std::to_string(ctx.record_offset + invalid_from) + ")",
                    ctx.byte_offset + *s.first_invalid, ctx.record_offset + invalid_from);
  }

  // Column layout.
  const Selection& sel = opt.selection;
  std::size_t input_columns = 0;
  if (plan.schema) {
    input_columns = plan.schema->size();
  } else if (s.stats.any()) {
    input_columns = s.stats.max;
  }
  if (!plan.infer_only && sel.columns) {
    for (auto c : *sel.columns) {
      if (c >= input_columns) {
        throw ConfigError("projected column " + std::to_string(c) + " is out of range (input has " +
                          std::to_string(input_columns) + " columns)");
      }
    }
  }
  const auto column_map = sel.column_map(input_columns);
  std::vector<std::size_t> output_inputs;  // input column of each output column
  if (sel.columns) {
    for (auto c : *sel.columns) {
      if (c < input_columns) output_inputs.push_back(c);
    }
  } else {
    for (std::size_t c = 0; c < input_columns; ++c) output_inputs.push_back(c);
  }
  const std::size_t output_columns = output_inputs.size();

  ColumnCountStats cumulative = ctx.column_stats;
  cumulative.merge(s.stats);
  const bool term_found =
      opt.mode == TaggingMode::tagged || opt.mode == TaggingMode::vector_delimited
          ? false
          : terminator_in_data(data, s.metas, opt.chunk_size, s.cut, opt.terminator, pool);
  const TaggingMode mode = choose_mode(opt.mode, cumulative, term_found);
  diag.mode_used = mode;

  // Rows of this partition.
  const std::uint64_t base = ctx.record_offset;
  const std::uint64_t skipped_before_base = sel.skipped_before(base);
  const std::uint64_t row_base = base - skipped_before_base;
  const std::uint64_t rows = records - (sel.skipped_before(base + records) - skipped_before_base);
  const std::uint64_t valid_rows = invalid_from - (sel.skipped_before(base + invalid_from) - skipped_before_base);

  // Tag and partition window by window into per-column builders.
  std::vector<ColumnCssBuilder> builders(output_columns);
  {
    TagInput in;
    in.data = data;
    in.metas = s.metas;
    in.record_offsets = s.record_offsets;
    in.column_offsets = s.column_offsets;
    in.chunk_size = opt.chunk_size;
    in.limit = s.cut;
    in.terminated_records = s.terminated_records;
    in.close_trailing = s.trailing_record;
    in.trailing_column = s.trailing_column;
    in.record_base = base;
    in.row_base = row_base;
    in.valid_records = invalid_from;
    in.selection = &sel;
    in.column_map = column_map;
    in.mode = mode;
    in.terminator = opt.terminator;

    const std::size_t window_chunks = std::max<std::size_t>(1, opt.window_bytes / opt.chunk_size);
    const std::size_t tagged_chunks = std::min(s.metas.size(), (s.cut + opt.chunk_size - 1) / opt.chunk_size);
    for (std::size_t first = 0; first < tagged_chunks; first += window_chunks) {
      const std::size_t last = std::min(tagged_chunks, first + window_chunks);
      TaggedSymbols tagged;
      {
        StageTimer t(times.tag);
        tagged = tag_symbols(in, first, last, pool);
      }
      diag.irrelevant_symbols += tagged.irrelevant;
      StageTimer t(times.partition);
      const Css css = partition_by_column(tagged, output_columns, mode, opt.terminator, pool);
      tagged = {};
      pool.parallel_for(output_columns, [&](std::size_t c) { builders[c].append(css, c); });
    }
    StageTimer t(times.partition);
    for (auto& b : builders) b.finish(valid_rows);
  }
  s.metas = {};
  s.record_offsets = {};
  s.column_offsets = {};

  // Types and conversion.
  {
    StageTimer t(times.convert);
    if (plan.infer_only) {
      out.inferred.assign(input_columns, InferState{});
      for (std::size_t oc = 0; oc < output_columns; ++oc) {
        const ColumnView view{builders[oc].data, builders[oc].ends, enc, rows, valid_rows};
        out.inferred[output_inputs[oc]] = infer_column(view, pool);
      }
    } else {
      out.table.rows = rows;
      for (std::size_t oc = 0; oc < output_columns; ++oc) {
        const std::size_t ic = output_inputs[oc];
        const ColumnView view{builders[oc].data, builders[oc].ends, enc, rows, valid_rows};
        ColumnSchema col = plan.schema ? (*plan.schema)[ic] : inferred_column(ic, infer_type(view, pool));
        ConvertOptions co;
        co.big_field_threshold = opt.big_field_threshold;
        co.strict = opt.strict;
        co.row_base = row_base;
        co.selection = &sel;
        co.column_index = ic;
        auto res = convert_column(view, col, co, pool);
        diag.conversion_errors += res.conversion_errors;
        out.table.columns.push_back({std::move(col), std::move(res.column)});
        builders[oc] = {};
      }
    }
  }

  out.cut = s.cut;
  ctx.seed_state = final ? ctx.seed_state : s.state_at_cut;
  ctx.record_offset += records;
  ctx.column_offset = ColumnOffset::abs(0);
  ctx.byte_offset += s.cut;
  ctx.invalid = ctx.invalid || s.first_invalid.has_value();
  ctx.column_stats = cumulative;
  return out;
}

/// One partition step: parses ctx.carry_over ++ raw and moves the
/// unparsed tail into the returned context's carry-over.
inline PartitionOutput parse_partition(PartitionContext& ctx, std::span<const std::uint8_t> raw, bool final,
                                       const Dialect& dialect, const SchemaPlan& plan, const ParseOptions& opt,
                                       WorkerPool& pool) {
  std::vector<std::uint8_t> data;
  data.reserve(ctx.carry_over.size() + raw.size());
  data.insert(data.end(), ctx.carry_over.begin(), ctx.carry_over.end());
  data.insert(data.end(), raw.begin(), raw.end());
  auto out = parse_partition_buffer(ctx, data, final, dialect, plan, opt, pool);
  ctx.carry_over.assign(data.begin() + static_cast<std::ptrdiff_t>(out.cut), data.end());
  return out;
}

/// Joins per-column inference states; missing columns are neutral.
inline void join_inferred(std::vector<InferState>& acc, const std::vector<InferState>& part) {
  if (acc.size() < part.size()) acc.resize(part.size());
  for (std::size_t c = 0; c < part.size(); ++c) acc[c] = join(acc[c], part[c]);
}

/// Schema for `columns` input columns with inferred types (utf8 where unknown).
inline Schema schema_from_inference(std::size_t columns, const std::vector<InferState>& states) {
  Schema schema;
  for (std::size_t c = 0; c < columns; ++c) {
    schema.push_back(inferred_column(c, finalize(c < states.size() ? states[c] : InferState{})));
  }
  return schema;
}

struct ParseResult {
  Table table;
  Diagnostics diag;
  StageTimes times;
};

/// Parses a whole in-memory input as one final partition.
inline ParseResult parse_buffer(std::span<const std::uint8_t> input, const Dialect& dialect, const ParseOptions& opt,
                                const std::optional<Schema>& schema, WorkerPool& pool) {
  validate_options(opt);
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::uint8_t> pruned;
  if (!opt.skip_rows.empty()) {
    pruned = prune_rows(input, opt.encoding, opt.skip_rows, pool);
    input = pruned;
  }
  PartitionContext ctx = PartitionContext::initial(dialect.spec);
  SchemaPlan plan{schema, false};
  auto out = parse_partition_buffer(ctx, input, true, dialect, plan, opt, pool);
  ParseResult res{std::move(out.table), std::move(out.diag), out.times};
  res.times.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

inline ParseResult parse_buffer(std::span<const std::uint8_t> input, const Dialect& dialect, const ParseOptions& opt,
                                const std::optional<Schema>& schema = std::nullopt) {
  validate_options(opt);
  WorkerPool pool(opt.workers);
  return parse_buffer(input, dialect, opt, schema, pool);
}

}  // namespace dsvpar
