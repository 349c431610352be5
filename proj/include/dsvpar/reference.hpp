#pragma once

// Sequential reference parser: one DFA instance reading the input from the
// first byte to the last. It shares the dialect, scalar parsing and column
// building with the parallel pipeline but none of the chunk, scan, tagging or
// partitioning code, and serves as ground truth in differential tests.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsvpar/container.hpp"
#include "dsvpar/dfa.hpp"
#include "dsvpar/encoding.hpp"
#include "dsvpar/error.hpp"
#include "dsvpar/pipeline.hpp"
#include "dsvpar/typeconv.hpp"

namespace dsvpar {

/// Per-byte record of the sequential run.
struct OracleTrace {
  enum : std::uint8_t { kControl = 1, kField = 2, kRecord = 4 };

  std::vector<StateIndex> state;       // state in effect before the byte is read
  std::vector<std::uint64_t> record;   // record the byte belongs to
  std::vector<std::uint64_t> column;   // column position at the byte
  std::vector<std::uint8_t> klass;     // kControl | kField | kRecord bits
};

struct OracleResult {
  Table table;
  Diagnostics diag;
  std::vector<std::vector<std::string>> records;  // raw field bytes of every record
  std::optional<OracleTrace> trace;
};

namespace oracle_detail {

inline std::vector<std::uint8_t> drop_lines(std::span<const std::uint8_t> in, EncodingId enc,
                                            const std::vector<std::uint64_t>& skip) {
  std::vector<std::uint8_t> out;
  const std::size_t w = unit_size(enc);
  std::uint64_t row = 0;
  std::size_t i = 0;
  for (; i + w <= in.size(); i += w) {
    const bool lf = w == 1 ? in[i] == '\n' : load_unit16(in.data() + i, enc) == 0x000A;
    if (!std::binary_search(skip.begin(), skip.end(), row)) out.insert(out.end(), in.begin() + i, in.begin() + i + w);
    if (lf) ++row;
  }
  if (i < in.size() && !std::binary_search(skip.begin(), skip.end(), row)) out.push_back(in[i]);
  return out;
}

}  // namespace oracle_detail

/// State at the first byte of each chunk of `chunk_size` bytes.
inline std::vector<StateIndex> boundary_states(std::span<const std::uint8_t> input, const DfaSpec& spec,
                                               EncodingId enc, std::size_t chunk_size, StateIndex seed) {
  std::vector<StateIndex> out;
  StateIndex state = seed;
  const std::size_t w = unit_size(enc);
  for (std::size_t i = 0; i < input.size(); i += w) {
    if (i % chunk_size == 0) out.push_back(state);
    if (w == 2 && (i + 1 >= input.size())) break;
    const std::uint32_t u = w == 1 ? input[i] : load_unit16(input.data() + i, enc);
    const bool trailing = w == 1 ? (enc == EncodingId::utf8 && (u & 0xC0) == 0x80) : (u >= 0xDC00 && u <= 0xDFFF);
    if (trailing) continue;
    const GroupIndex g = u < 256 ? spec.group_of(static_cast<std::uint8_t>(u)) : spec.catch_all_group();
    state = spec.transition(state, g);
  }
  return out;
}

inline std::vector<StateIndex> boundary_states(std::span<const std::uint8_t> input, const DfaSpec& spec,
                                               EncodingId enc, std::size_t chunk_size) {
  return boundary_states(input, spec, enc, chunk_size, spec.start_state());
}

inline OracleResult sequential_parse(std::span<const std::uint8_t> input, const DfaSpec& spec,
                                     const ParseOptions& opt, const std::optional<Schema>& schema = std::nullopt,
                                     bool with_trace = false) {
  validate_options(opt);
  const EncodingId enc = opt.encoding;
  const std::size_t w = unit_size(enc);
  std::vector<std::uint8_t> pruned;
  if (!opt.skip_rows.empty()) {
    pruned = oracle_detail::drop_lines(input, enc, opt.skip_rows);
    input = pruned;
  }
  const std::size_t n = input.size();
  if (w == 2 && n % 2 != 0) throw DataError("UTF-16 input has an odd number of bytes", n);

  OracleResult res;
  Diagnostics& diag = res.diag;
  if (with_trace) {
    res.trace.emplace();
    res.trace->state.resize(n);
    res.trace->record.resize(n);
    res.trace->column.resize(n);
    res.trace->klass.resize(n);
  }

  StateIndex state = spec.start_state();
  std::vector<std::string> fields;
  std::string field;
  bool open = false;  // bytes read since the last record delimiter
  std::optional<std::uint64_t> invalid_at;
  std::uint64_t invalid_record = 0;
  bool terminator_seen = false;

  auto note = [&](std::size_t i, std::uint8_t klass) {
    if (!res.trace) return;
    res.trace->state[i] = state;
    res.trace->record[i] = res.records.size();
    res.trace->column[i] = fields.size();
    res.trace->klass[i] = klass;
  };
  auto data = [&](std::size_t i, std::size_t width) {
    for (std::size_t k = 0; k < width; ++k) {
      note(i + k, 0);
      field.push_back(static_cast<char>(input[i + k]));
      if (input[i + k] == opt.terminator) terminator_seen = true;
    }
    open = true;
  };

  for (std::size_t i = 0; i < n; i += w) {
    const std::uint32_t u = w == 1 ? input[i] : load_unit16(input.data() + i, enc);
    const bool trailing = w == 1 ? (enc == EncodingId::utf8 && (u & 0xC0) == 0x80) : (u >= 0xDC00 && u <= 0xDFFF);
    if (trailing) {
      data(i, w);
      continue;
    }
    const GroupIndex g = u < 256 ? spec.group_of(static_cast<std::uint8_t>(u)) : spec.catch_all_group();
    const EmissionAction act = spec.emission(state, g);
    const StateIndex next = spec.transition(state, g);
    if (next == spec.invalid_state() && !invalid_at) {
      invalid_at = i;
      invalid_record = res.records.size();
    }
    if (act.control) {
      const std::uint8_t klass = OracleTrace::kControl | (act.field || act.record ? OracleTrace::kField : 0) |
                                 (act.record ? OracleTrace::kRecord : 0);
      note(i, klass);
      if (w == 2) note(i + 1, OracleTrace::kControl);
      open = true;
      if (act.field || act.record) {
        fields.push_back(std::move(field));
        field.clear();
      }
      if (act.record) {
        res.records.push_back(std::move(fields));
        fields.clear();
        open = false;
      }
    } else {
      data(i, w);
    }
    state = next;
  }
  const std::uint64_t terminated = res.records.size();
  if (open) {
    fields.push_back(std::move(field));
    res.records.push_back(std::move(fields));
  }
  if (!invalid_at && !spec.is_accepting(state)) {
    invalid_at = n;
    invalid_record = terminated;
  }

  const std::uint64_t records = res.records.size();
  diag.records = records;
  for (const auto& r : res.records) diag.column_stats.merge(static_cast<std::uint32_t>(r.size()));
  const std::uint64_t invalid_from = invalid_at ? std::min<std::uint64_t>(invalid_record, records) : records;
  diag.invalid_records = records - invalid_from;
  if (invalid_at) diag.first_invalid_offset = *invalid_at;
  if (opt.strict && invalid_at) {
    throw DataError("invalid input at byte " + std::to_string(*invalid_at) + " (record " +
                        std::to_string(invalid_from) + ")",
                    *invalid_at, invalid_from);
  }

  const std::size_t input_columns = schema ? schema->size() : (records ? diag.column_stats.max : 0);
  std::vector<std::size_t> outputs;
  if (opt.selection.columns) {
    for (auto c : *opt.selection.columns) {
      if (c >= input_columns) {
        throw ConfigError("projected column " + std::to_string(c) + " is out of range (input has " +
                          std::to_string(input_columns) + " columns)");
      }
      outputs.push_back(c);
    }
  } else {
    for (std::size_t c = 0; c < input_columns; ++c) outputs.push_back(c);
  }

  const bool check_terminator =
      opt.mode == TaggingMode::automatic || opt.mode == TaggingMode::inline_terminated;
  diag.mode_used = choose_mode(opt.mode, diag.column_stats, check_terminator && terminator_seen);

  auto kept = [&](std::uint64_t r) { return !opt.selection.skipped(r); };
  auto text_of = [&](const std::vector<std::string>& rec, std::size_t c) -> std::string {
    if (c >= rec.size()) return {};
    const auto& f = rec[c];
    if (w == 1) return f;
    return to_utf8({reinterpret_cast<const std::uint8_t*>(f.data()), f.size()}, enc);
  };

  std::uint64_t rows = 0;
  for (std::uint64_t r = 0; r < records; ++r) rows += kept(r);
  res.table.rows = rows;

  for (std::size_t c : outputs) {
    ColumnSchema col;
    if (schema) {
      col = (*schema)[c];
    } else {
      InferState st;
      for (std::uint64_t r = 0; r < invalid_from; ++r) {
        if (kept(r)) st = join(st, classify(text_of(res.records[r], c)));
      }
      col = inferred_column(c, finalize(st));
    }
    ColumnBuilder b(col.type);
    for (std::uint64_t r = 0; r < records; ++r) {
      if (!kept(r)) continue;
      if (r >= invalid_from) {
        b.append_null();
        continue;
      }
      const std::string text = text_of(res.records[r], c);
      std::optional<Value> v;
      switch (decide_field(text, col, v)) {
        case FieldOutcome::value: b.append(*v); break;
        case FieldOutcome::null: b.append_null(); break;
        case FieldOutcome::error:
          if (opt.strict) throw ConversionError(r, c, text.substr(0, 40) + (text.size() > 40 ? "..." : ""));
          ++diag.conversion_errors;
          b.append_null();
          break;
      }
    }
    res.table.columns.push_back({std::move(col), std::move(b).finish()});
  }
  return res;
}

}  // namespace dsvpar
