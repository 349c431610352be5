#pragma once

// Exclusive/inclusive prefix scans over arbitrary associative operators, and
// the two operators the parser scans with: state-transition-vector
// composition and relative/absolute column-offset combination.
//
// The scan is a deterministic two-pass blocked scan: reduce each fixed-size
// block, scan the block aggregates, rescan each block from its base. Block
// boundaries depend only on the input length, so results do not depend on
// the number of workers even for operators that are only approximately
// associative.

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dsvpar/packed_array.hpp"
#include "dsvpar/worker_pool.hpp"

namespace dsvpar {

inline constexpr std::size_t kScanBlock = 4096;

/// Replaces items[i] with initial ⊕ items[0] ⊕ ... ⊕ items[i-1] and returns
/// the total initial ⊕ items[0] ⊕ ... ⊕ items[n-1].
template <class T, class Op>
T exclusive_scan_inplace(std::span<T> items, Op op, const T& identity, const T& initial,
                         WorkerPool& pool) {
  const std::size_t n = items.size();
  const std::size_t blocks = (n + kScanBlock - 1) / kScanBlock;
  if (blocks <= 1) {
    T acc = initial;
    for (auto& x : items) {
      T next = op(acc, x);
      x = std::move(acc);
      acc = std::move(next);
    }
    return acc;
  }

  std::vector<T> bases(blocks, identity);
  pool.parallel_for(blocks, [&](std::size_t b) {
    const std::size_t end = std::min(n, (b + 1) * kScanBlock);
    T acc = identity;
    for (std::size_t i = b * kScanBlock; i < end; ++i) acc = op(acc, items[i]);
    bases[b] = std::move(acc);
  });

  T acc = initial;
  for (auto& base : bases) {
    T next = op(acc, base);
    base = std::move(acc);
    acc = std::move(next);
  }

  pool.parallel_for(blocks, [&](std::size_t b) {
    const std::size_t end = std::min(n, (b + 1) * kScanBlock);
    T running = bases[b];
    for (std::size_t i = b * kScanBlock; i < end; ++i) {
      T next = op(running, items[i]);
      items[i] = std::move(running);
      running = std::move(next);
    }
  });
  return acc;
}

template <class T, class Op>
T exclusive_scan_inplace(std::span<T> items, Op op, const T& identity, WorkerPool& pool) {
  return exclusive_scan_inplace(items, op, identity, identity, pool);
}

template <class T, class Op>
std::vector<T> exclusive_scan(std::span<const T> items, Op op, const T& identity, WorkerPool& pool) {
  std::vector<T> out(items.begin(), items.end());
  exclusive_scan_inplace(std::span<T>(out), op, identity, identity, pool);
  return out;
}

template <class T, class Op>
std::vector<T> exclusive_scan(std::span<const T> items, Op op, const T& identity,
                              std::size_t worker_budget) {
  WorkerPool pool(worker_budget);
  return exclusive_scan(items, op, identity, pool);
}

template <class T, class Op>
std::vector<T> inclusive_scan(std::span<const T> items, Op op, const T& identity, WorkerPool& pool) {
  std::vector<T> out = exclusive_scan(items, op, identity, pool);
  pool.for_each_block(out.size(), kScanBlock, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out[i] = op(out[i], items[i]);
  });
  return out;
}

template <class T, class Op>
std::vector<T> inclusive_scan(std::span<const T> items, Op op, const T& identity,
                              std::size_t worker_budget) {
  WorkerPool pool(worker_budget);
  return inclusive_scan(items, op, identity, pool);
}

// ---------------------------------------------------------------------------
// State-transition vectors

using StateIndex = std::uint8_t;

/// Entry i is the state a chunk ends in when entered in state i. Machines
/// with up to 16 states are stored as a packed 16 x 4-bit array.
class StateTransitionVector {
 public:
  static constexpr std::size_t kPackedStates = 16;

  StateTransitionVector() = default;

  explicit StateTransitionVector(std::size_t size) : size_(static_cast<std::uint16_t>(size)) {
    if (size > 256) throw std::invalid_argument("state-transition vector larger than 256 states");
    if (size > kPackedStates) wide_.assign(size, 0);
  }

  static StateTransitionVector identity(std::size_t size) {
    StateTransitionVector v(size);
    for (std::size_t i = 0; i < size; ++i) v.set(i, static_cast<StateIndex>(i));
    return v;
  }

  static StateTransitionVector from(std::span<const StateIndex> entries) {
    StateTransitionVector v(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) v.set(i, entries[i]);
    return v;
  }

  std::size_t size() const { return size_; }

  StateIndex operator[](std::size_t i) const {
    return size_ <= kPackedStates ? static_cast<StateIndex>(packed_.get(static_cast<std::uint32_t>(i)))
                                  : wide_[i];
  }

  void set(std::size_t i, StateIndex s) {
    if (size_ <= kPackedStates) {
      packed_.set(static_cast<std::uint32_t>(i), s);
    } else {
      wide_[i] = s;
    }
  }

  std::vector<StateIndex> entries() const {
    std::vector<StateIndex> out(size_);
    for (std::size_t i = 0; i < size_; ++i) out[i] = (*this)[i];
    return out;
  }

  friend bool operator==(const StateTransitionVector&, const StateTransitionVector&) = default;

 private:
  std::uint16_t size_ = 0;
  PackedArray<16, 4> packed_;
  std::vector<StateIndex> wide_;
};

/// (a ∘ b)[i] = b[a[i]]: run the chunk described by a, then the one by b.
inline StateTransitionVector compose(const StateTransitionVector& a, const StateTransitionVector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("compose: state-transition vector sizes differ");
  StateTransitionVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.set(i, b[a[i]]);
  return out;
}

// ---------------------------------------------------------------------------
// Column offsets

struct ColumnOffset {
  enum class Kind : std::uint8_t { relative, absolute };

  Kind kind = Kind::relative;
  std::uint64_t value = 0;

  static constexpr ColumnOffset rel(std::uint64_t v) { return {Kind::relative, v}; }
  static constexpr ColumnOffset abs(std::uint64_t v) { return {Kind::absolute, v}; }
  constexpr bool is_absolute() const { return kind == Kind::absolute; }

  friend constexpr bool operator==(const ColumnOffset&, const ColumnOffset&) = default;
};

/// An absolute right operand replaces the left; a relative one adds to it.
constexpr ColumnOffset combine_offset(const ColumnOffset& a, const ColumnOffset& b) {
  if (b.is_absolute()) return b;
  return {a.kind, a.value + b.value};
}

}  // namespace dsvpar
