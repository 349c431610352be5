#pragma once

// Chunk-level DFA work. Every chunk is simulated once from every state to get
// its state-transition vector; an exclusive scan of those vectors under
// composition resolves the true start state of each chunk without a
// sequential pass. A second single-instance pass then classifies each byte
// into the record, field and control bitmaps.

#include <array>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "dsvpar/dfa.hpp"
#include "dsvpar/encoding.hpp"
#include "dsvpar/scan.hpp"
#include "dsvpar/swar.hpp"

namespace dsvpar {

inline constexpr std::size_t kDefaultChunkSize = 31;
inline constexpr std::size_t kMaxChunkSize = 64;
inline constexpr std::uint8_t kNoPosition = 0xFF;

/// Per-chunk bitmap indexes. Bit j describes byte j of the chunk.
struct ChunkMeta {
  std::uint64_t rec_bidx = 0;
  std::uint64_t col_bidx = 0;
  std::uint64_t ctl_bidx = 0;
  StateIndex start_state = 0;
  StateIndex end_state = 0;
  StateIndex state_after_last_record = 0;  // meaningful iff rec_bidx != 0
  std::uint8_t length = 0;
  std::uint8_t skip_prefix = 0;
  std::uint8_t first_invalid = kNoPosition;  // first byte whose transition lands in the invalid state
};

/// Language matched by a DfaSpec plus its compiled symbol matcher.
struct Dialect {
  DfaSpec spec;
  SymbolMatcher matcher;

  explicit Dialect(DfaSpec s) : spec(std::move(s)), matcher(SymbolMatcher::for_spec(spec)) {}
};

inline GroupIndex group_for_unit(const SymbolMatcher& matcher, std::uint32_t unit) {
  return unit < 256 ? matcher.match(static_cast<std::uint8_t>(unit)) : matcher.catch_all_group();
}

inline StateTransitionVector simulate_chunk_all_states(std::span<const std::uint8_t> chunk,
                                                       const DfaSpec& spec,
                                                       const SymbolMatcher& matcher,
                                                       EncodingId enc) {
  const std::size_t states = spec.state_count();
  std::array<StateIndex, 256> cur;
  std::iota(cur.begin(), cur.begin() + states, StateIndex{0});
  const std::size_t skip = continuation_prefix_len(chunk, enc);
  for_each_unit(
      chunk, enc, skip,
      [&](std::size_t, std::size_t, std::uint32_t unit) {
        const StateIndex* row = spec.row(group_for_unit(matcher, unit)).data();
        for (std::size_t i = 0; i < states; ++i) cur[i] = row[cur[i]];
      },
      [](std::size_t, std::size_t) {});
  return StateTransitionVector::from(std::span<const StateIndex>(cur.data(), states));
}

struct ResolvedStates {
  std::vector<StateIndex> start_states;
  StateIndex end_state = 0;  // state after the last chunk
};

/// Exclusive composite scan seeded with the identity; each chunk then reads
/// entry `seed_state` of its scanned vector.
inline ResolvedStates resolve_start_states(std::vector<StateTransitionVector> stvs, StateIndex seed_state,
                                           std::size_t state_count, WorkerPool& pool) {
  const auto identity = StateTransitionVector::identity(state_count);
  const auto total = exclusive_scan_inplace(
      std::span<StateTransitionVector>(stvs),
      [](const StateTransitionVector& a, const StateTransitionVector& b) { return compose(a, b); },
      identity, pool);
  ResolvedStates out;
  out.start_states.resize(stvs.size());
  pool.for_each_block(stvs.size(), kScanBlock, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out.start_states[i] = stvs[i][seed_state];
  });
  out.end_state = total[seed_state];
  return out;
}

inline ResolvedStates resolve_start_states(std::vector<StateTransitionVector> stvs, StateIndex seed_state,
                                           std::size_t state_count, std::size_t worker_budget) {
  WorkerPool pool(worker_budget);
  return resolve_start_states(std::move(stvs), seed_state, state_count, pool);
}

inline ChunkMeta emit_bitmaps(std::span<const std::uint8_t> chunk, const DfaSpec& spec,
                              const SymbolMatcher& matcher, StateIndex start_state, EncodingId enc) {
  ChunkMeta meta;
  meta.length = static_cast<std::uint8_t>(chunk.size());
  meta.start_state = start_state;
  const std::size_t skip = continuation_prefix_len(chunk, enc);
  meta.skip_prefix = static_cast<std::uint8_t>(skip);
  const StateIndex invalid = spec.invalid_state();
  StateIndex state = start_state;
  for_each_unit(
      chunk, enc, skip,
      [&](std::size_t pos, std::size_t width, std::uint32_t unit) {
        const GroupIndex g = group_for_unit(matcher, unit);
        const EmissionAction& act = spec.emission(state, g);
        const StateIndex next = spec.transition(state, g);
        if (act.control) {
          const std::uint64_t unit_mask = (width == 1 ? std::uint64_t{1} : std::uint64_t{3}) << pos;
          meta.ctl_bidx |= unit_mask;
          if (act.field || act.record) meta.col_bidx |= std::uint64_t{1} << pos;
          if (act.record) meta.rec_bidx |= std::uint64_t{1} << pos;
        }
        if (next == invalid && meta.first_invalid == kNoPosition) {
          meta.first_invalid = static_cast<std::uint8_t>(pos);
        }
        state = next;
        if (act.record) meta.state_after_last_record = state;
      },
      [](std::size_t, std::size_t) {});
  meta.end_state = state;
  return meta;
}

}  // namespace dsvpar
