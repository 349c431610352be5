#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

namespace dsvpar {
namespace {

using testing::bytes;
using testing::csv;

StateTransitionVector stv(std::string_view s) {
  const auto b = bytes(s);
  return simulate_chunk_all_states(b, csv().spec, csv().matcher, EncodingId::ascii);
}

TEST(ChunkSim, SingleComma) {
  EXPECT_EQ(stv(",").entries(), (std::vector<StateIndex>{3, 1, 3, 3, 3, 5}));
}

TEST(ChunkSim, QuoteCommaQuote) {
  // From EOR: '"' -> ENC, ',' -> ENC, '"' -> ESC. From FLD: '"' is invalid.
  const auto e = stv("\",\"").entries();
  EXPECT_EQ(e[csv::kEndOfRecord], csv::kEscape);
  EXPECT_EQ(e[csv::kField], csv::kInvalid);
  EXPECT_EQ(e[csv::kInvalid], csv::kInvalid);
}

TEST(ChunkSim, EmptyChunkIsIdentity) {
  EXPECT_EQ(stv("").entries(), StateTransitionVector::identity(6).entries());
}

TEST(Bitmaps, SimpleRecord) {
  const auto b = bytes("a,b\n");
  const auto m = emit_bitmaps(b, csv().spec, csv().matcher, csv::kEndOfRecord, EncodingId::ascii);
  EXPECT_EQ(m.rec_bidx, 0b1000u);
  EXPECT_EQ(m.col_bidx, 0b1010u);
  EXPECT_EQ(m.ctl_bidx, 0b1010u);
  EXPECT_EQ(m.length, 4);
  EXPECT_EQ(m.end_state, csv::kEndOfRecord);
  EXPECT_EQ(m.first_invalid, kNoPosition);
}

TEST(Bitmaps, QuotedDelimitersAreData) {
  const auto b = bytes("\"a,\nb\"\"\"\n");
  const auto m = emit_bitmaps(b, csv().spec, csv().matcher, csv::kEndOfRecord, EncodingId::ascii);
  // Control: opening quote (0), first of the doubled pair (5), closing quote (7), newline (8).
  EXPECT_EQ(m.ctl_bidx, (1u << 0) | (1u << 5) | (1u << 7) | (1u << 8));
  EXPECT_EQ(m.col_bidx, 1u << 8);
  EXPECT_EQ(m.rec_bidx, 1u << 8);
}

TEST(Bitmaps, StartStateMatters) {
  const auto b = bytes("x,\n");
  const auto inside = emit_bitmaps(b, csv().spec, csv().matcher, csv::kEnclosed, EncodingId::ascii);
  EXPECT_EQ(inside.ctl_bidx, 0u);
  EXPECT_EQ(inside.end_state, csv::kEnclosed);
}

TEST(Bitmaps, FirstInvalid) {
  const auto b = bytes("ab\"c");
  const auto m = emit_bitmaps(b, csv().spec, csv().matcher, csv::kEndOfRecord, EncodingId::ascii);
  EXPECT_EQ(m.first_invalid, 2);
  EXPECT_EQ(m.end_state, csv::kInvalid);
}

TEST(Bitmaps, SixtyFourByteChunk) {
  std::string s(63, 'a');
  s += '\n';
  const auto b = bytes(s);
  const auto m = emit_bitmaps(b, csv().spec, csv().matcher, csv::kEndOfRecord, EncodingId::ascii);
  EXPECT_EQ(m.rec_bidx, std::uint64_t{1} << 63);
}

// Resolved start states equal the sequential state at every chunk boundary.
TEST(ResolveStates, MatchesSequentialWalk) {
  testing::FuzzSource fuzz(4);
  for (int t = 0; t < 300; ++t) {
    const auto s = fuzz.input(2000);
    const auto in = bytes(s);
    const std::size_t cs = 1 + fuzz.below(64);
    std::vector<StateTransitionVector> stvs;
    for (std::size_t i = 0; i < in.size(); i += cs) {
      stvs.push_back(simulate_chunk_all_states(std::span(in).subspan(i, std::min(cs, in.size() - i)), csv().spec,
                                               csv().matcher, EncodingId::ascii));
    }
    const auto resolved = resolve_start_states(stvs, csv().spec.start_state(), 6, 1 + t % 3);
    EXPECT_EQ(resolved.start_states, boundary_states(in, csv().spec, EncodingId::ascii, cs));
    StateIndex end = csv().spec.start_state();
    for (auto c : in) end = csv().spec.transition(end, csv().spec.group_of(c));
    EXPECT_EQ(resolved.end_state, end);
  }
}

TEST(ResolveStates, SeedSelectsEntry) {
  const auto in = bytes("a\"b\n");
  std::vector<StateTransitionVector> stvs = {
      simulate_chunk_all_states(std::span(in).subspan(0, 2), csv().spec, csv().matcher, EncodingId::ascii),
      simulate_chunk_all_states(std::span(in).subspan(2, 2), csv().spec, csv().matcher, EncodingId::ascii)};
  const auto from_enc = resolve_start_states(stvs, csv::kEnclosed, 6, 1);
  EXPECT_EQ(from_enc.start_states, (std::vector<StateIndex>{csv::kEnclosed, csv::kEscape}));
  EXPECT_EQ(from_enc.end_state, csv::kInvalid);
}

TEST(ResolveStates, ManyChunksAcrossScanBlocks) {
  testing::FuzzSource fuzz(8);
  const auto s = fuzz.records(200000);
  const auto in = bytes(s);
  const std::size_t cs = 7;
  std::vector<StateTransitionVector> stvs;
  for (std::size_t i = 0; i < in.size(); i += cs) {
    stvs.push_back(simulate_chunk_all_states(std::span(in).subspan(i, std::min(cs, in.size() - i)), csv().spec,
                                             csv().matcher, EncodingId::ascii));
  }
  ASSERT_GT(stvs.size(), 2 * kScanBlock);
  const auto expected = boundary_states(in, csv().spec, EncodingId::ascii, cs);
  for (std::size_t w : {1, 2, 5}) EXPECT_EQ(resolve_start_states(stvs, 0, 6, w).start_states, expected);
}

}  // namespace
}  // namespace dsvpar
