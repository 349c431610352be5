#pragma once

// Branch-free symbol-to-group matching. Up to eight match bytes are packed
// into two 32-bit lookup words; the read symbol is replicated into every
// lane, XORed against each word, and the zero-byte test marks matching lanes.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "dsvpar/dfa.hpp"

namespace dsvpar {

/// Sets bit 7 of every zero byte lane (and possibly of lanes above a zero
/// lane, through borrow propagation).
constexpr std::uint32_t h_nullbyte(std::uint32_t x) {
  return (x - 0x01010101u) & ~x & 0x80808080u;
}

/// Index of the most significant set bit, 0xFFFFFFFF for zero.
constexpr std::uint32_t bfind(std::uint32_t x) {
  return x == 0 ? 0xFFFFFFFFu : 31u - static_cast<std::uint32_t>(std::countl_zero(x));
}

class SymbolMatcher {
 public:
  static constexpr std::size_t kMaxSwarBytes = 8;
  static constexpr std::uint32_t kNoMatch = 0x1FFFFFFFu;

  /// `bytes[i]` maps to `groups[i]`; anything else maps to `catch_all`.
  SymbolMatcher(std::span<const std::uint8_t> bytes, std::span<const GroupIndex> groups,
                GroupIndex catch_all)
      : catch_all_(catch_all) {
    if (bytes.size() != groups.size()) throw ConfigError("matcher bytes and groups differ in length");
    std::array<bool, 256> seen{};
    for (std::uint8_t b : bytes) {
      if (seen[b]) throw ConfigError("matcher lookup bytes must be distinct");
      seen[b] = true;
    }
    count_ = static_cast<std::uint32_t>(bytes.size());
    if (bytes.size() > kMaxSwarBytes) {
      table_.assign(256, catch_all);
      for (std::size_t i = 0; i < bytes.size(); ++i) table_[bytes[i]] = groups[i];
      return;
    }
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      std::uint32_t& word = i < 4 ? lo_ : hi_;
      word |= std::uint32_t{bytes[i]} << (8 * (i % 4));
      position_to_group_[i] = groups[i];
    }
    catchall_position_ = count_;
    std::fill(position_to_group_.begin() + count_, position_to_group_.end(), catch_all);
  }

  static SymbolMatcher for_spec(const DfaSpec& spec) {
    std::vector<std::uint8_t> bytes;
    std::vector<GroupIndex> groups;
    for (std::size_t g = 0; g < spec.group_count(); ++g) {
      for (std::uint8_t b : spec.groups()[g].bytes) {
        bytes.push_back(b);
        groups.push_back(static_cast<GroupIndex>(g));
      }
    }
    return SymbolMatcher(bytes, groups, spec.catch_all_group());
  }

  bool uses_swar() const { return table_.empty(); }
  std::uint32_t low_word() const { return lo_; }
  std::uint32_t high_word() const { return hi_; }
  std::uint32_t catchall_position() const { return catchall_position_; }
  GroupIndex catch_all_group() const { return catch_all_; }

  /// Byte position of the matching lookup byte, clamped to the catch-all
  /// position when nothing matches.
  std::uint32_t match_position(std::uint8_t symbol) const {
    const std::uint32_t s = std::uint32_t{symbol} * 0x01010101u;
    const std::uint32_t lo = lane_index(h_nullbyte(lo_ ^ s));
    const std::uint32_t hi = lane_index(h_nullbyte(hi_ ^ s));
    const std::uint32_t idx = std::min(lo, hi == kNoMatch ? kNoMatch : hi + 4);
    return std::min(idx, catchall_position_);
  }

  GroupIndex match(std::uint8_t symbol) const {
    if (!table_.empty()) return table_[symbol];
    return position_to_group_[match_position(symbol)];
  }

 private:
  // The lowest flagged lane is always a true zero lane: borrows only travel
  // upwards from a zero lane, so spurious flags sit strictly above it.
  static constexpr std::uint32_t lane_index(std::uint32_t swar) {
    const std::uint32_t lsb = swar & (~swar + 1);
    const std::uint32_t pos = bfind(lsb) >> 3;
    return pos;
  }

  std::uint32_t lo_ = 0;
  std::uint32_t hi_ = 0;
  std::uint32_t count_ = 0;
  std::uint32_t catchall_position_ = 0;
  std::array<GroupIndex, kMaxSwarBytes + 1> position_to_group_{};
  GroupIndex catch_all_;
  std::vector<GroupIndex> table_;
};

inline GroupIndex match_symbol(const SymbolMatcher& matcher, std::uint8_t symbol) {
  return matcher.match(symbol);
}

}  // namespace dsvpar
