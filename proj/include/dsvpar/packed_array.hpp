#pragma once

// Fixed-capacity arrays of small unsigned integers whose items are split into
// power-of-two-wide fragments. Fragment j of every item lives in 32-bit word
// j, at bit offset (item index << log2(fragment width)).

#include <array>
#include <bit>
#include <cstdint>
#include <span>
#include <string>

#include "dsvpar/error.hpp"

namespace dsvpar {

struct PackedLayout {
  std::uint32_t capacity = 0;        // c
  std::uint32_t bits = 0;            // b
  std::uint32_t avail_bits = 0;      // a = floor(32 / c)
  std::uint32_t fragment_bits = 0;   // k = 2^floor(log2 a)
  std::uint32_t fragments = 0;       // f = ceil(b / k)
  std::uint32_t fragment_shift = 0;  // log2 k

  constexpr std::uint32_t fragment_mask() const {
    return fragment_bits >= 32 ? ~std::uint32_t{0} : (std::uint32_t{1} << fragment_bits) - 1;
  }

  friend constexpr bool operator==(const PackedLayout&, const PackedLayout&) = default;
};

constexpr PackedLayout packed_layout(std::uint32_t capacity, std::uint32_t bits) {
  if (capacity == 0 || bits == 0) throw ConfigError("packed layout needs capacity >= 1 and bits >= 1");
  if (capacity > 32) {
    throw ConfigError("packed layout capacity " + std::to_string(capacity) +
                      " leaves no bits per fragment in a 32-bit word");
  }
  if (bits > 32) throw ConfigError("packed layout supports items of at most 32 bits");
  PackedLayout l;
  l.capacity = capacity;
  l.bits = bits;
  l.avail_bits = 32 / capacity;
  l.fragment_bits = std::bit_floor(l.avail_bits);
  l.fragments = (bits + l.fragment_bits - 1) / l.fragment_bits;
  l.fragment_shift = static_cast<std::uint32_t>(std::countr_zero(l.fragment_bits));
  return l;
}

constexpr std::uint32_t packed_get(std::span<const std::uint32_t> words, const PackedLayout& l,
                                   std::uint32_t i) {
  const std::uint32_t offset = i << l.fragment_shift;
  const std::uint32_t mask = l.fragment_mask();
  std::uint32_t v = 0;
  for (std::uint32_t j = 0; j < l.fragments; ++j) {
    v |= ((words[j] >> offset) & mask) << (j << l.fragment_shift);
  }
  return v;
}

constexpr void packed_set(std::span<std::uint32_t> words, const PackedLayout& l, std::uint32_t i,
                          std::uint32_t v) {
  const std::uint32_t offset = i << l.fragment_shift;
  const std::uint32_t mask = l.fragment_mask();
  for (std::uint32_t j = 0; j < l.fragments; ++j) {
    const std::uint32_t fragment = (v >> (j << l.fragment_shift)) & mask;
    words[j] = (words[j] & ~(mask << offset)) | (fragment << offset);
  }
}

template <std::uint32_t Capacity, std::uint32_t Bits>
class PackedArray {
 public:
  static constexpr PackedLayout kLayout = packed_layout(Capacity, Bits);

  constexpr std::uint32_t get(std::uint32_t i) const { return packed_get(words_, kLayout, i); }
  constexpr void set(std::uint32_t i, std::uint32_t v) { packed_set(words_, kLayout, i, v); }

  constexpr std::span<const std::uint32_t, kLayout.fragments> words() const { return words_; }

  friend constexpr bool operator==(const PackedArray&, const PackedArray&) = default;

 private:
  std::array<std::uint32_t, kLayout.fragments> words_{};
};

}  // namespace dsvpar
