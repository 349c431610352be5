#pragma once

// Streaming ingestion. The input is read in partitions into two buffer
// slots; a reader thread fills one slot while the caller parses the other
// and a writer thread hands finished batches to the sink in partition order.
// The trailing incomplete record of each partition is copied in front of
// the next partition's bytes before the slot that held it may be refilled.

#include <condition_variable>
#include <cstdio>
#include <cstring>
#include <deque>
#include <exception>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dsvpar/container.hpp"
#include "dsvpar/pipeline.hpp"

namespace dsvpar {

inline constexpr std::size_t kDefaultPartitionSize = std::size_t{64} << 20;

struct PartitionRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;

  friend bool operator==(const PartitionRange&, const PartitionRange&) = default;
};

/// Contiguous ranges of `partition_size` bytes covering [0, total).
inline std::vector<PartitionRange> plan_partitions(std::uint64_t total, std::size_t partition_size) {
  if (partition_size == 0) throw ConfigError("partition size must be positive");
  std::vector<PartitionRange> out;
  for (std::uint64_t b = 0; b < total; b += partition_size) out.push_back({b, std::min<std::uint64_t>(total, b + partition_size)});
  return out;
}

/// Lazily yields fixed-size ranges of an input of unknown length.
class PartitionPlanner {
 public:
  explicit PartitionPlanner(std::size_t partition_size) : size_(partition_size) {
    if (size_ == 0) throw ConfigError("partition size must be positive");
  }
  PartitionRange next() {
    PartitionRange r{at_, at_ + size_};
    at_ += size_;
    return r;
  }

 private:
  std::size_t size_;
  std::uint64_t at_ = 0;
};

// ---------------------------------------------------------------------------
// Sources and sinks

class ByteSource {
 public:
  virtual ~ByteSource() = default;
  /// Reads up to n bytes; 0 means end of input.
  virtual std::size_t read(std::uint8_t* dst, std::size_t n) = 0;
  /// Restarts from the first byte; false if the source cannot.
  virtual bool rewind() { return false; }

  /// Fills dst completely unless the input ends first.
  std::size_t read_full(std::uint8_t* dst, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
      const std::size_t k = read(dst + got, n - got);
      if (k == 0) break;
      got += k;
    }
    return got;
  }
};

class MemorySource : public ByteSource {
 public:
  explicit MemorySource(std::span<const std::uint8_t> bytes, std::size_t max_read = ~std::size_t{0})
      : bytes_(bytes), max_read_(max_read) {}
  std::size_t read(std::uint8_t* dst, std::size_t n) override {
    n = std::min({n, bytes_.size() - at_, max_read_});
    if (n) std::memcpy(dst, bytes_.data() + at_, n);
    at_ += n;
    return n;
  }
  bool rewind() override {
    at_ = 0;
    return true;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t at_ = 0;
  std::size_t max_read_;
};

class FileSource : public ByteSource {
 public:
  explicit FileSource(const std::string& path) : file_(std::fopen(path.c_str(), "rb")), owned_(true) {
    if (!file_) throw IoError("cannot open '" + path + "': " + std::strerror(errno));
  }
  /// Wraps an open stream (e.g. stdin) without taking ownership.
  explicit FileSource(std::FILE* f) : file_(f), owned_(false) {}
  FileSource(const FileSource&) = delete;
  FileSource& operator=(const FileSource&) = delete;
  ~FileSource() override {
    if (owned_ && file_) std::fclose(file_);
  }

  std::size_t read(std::uint8_t* dst, std::size_t n) override {
    const std::size_t k = std::fread(dst, 1, n, file_);
    if (k == 0 && std::ferror(file_)) throw IoError(std::string("read failed: ") + std::strerror(errno));
    return k;
  }
  bool rewind() override { return std::fseek(file_, 0, SEEK_SET) == 0; }

 private:
  std::FILE* file_;
  bool owned_;
};

/// Copies a non-seekable source into an anonymous temporary file so it can
/// be read twice.
class SpoolSource : public ByteSource {
 public:
  explicit SpoolSource(ByteSource& in) : file_(std::tmpfile()) {
    if (!file_) throw IoError("cannot create a temporary file");
    std::vector<std::uint8_t> buf(std::size_t{1} << 20);
    for (std::size_t k; (k = in.read(buf.data(), buf.size())) > 0;) {
      if (std::fwrite(buf.data(), 1, k, file_) != k) throw IoError("cannot write the temporary file");
    }
    std::rewind(file_);
  }
  SpoolSource(const SpoolSource&) = delete;
  SpoolSource& operator=(const SpoolSource&) = delete;
  ~SpoolSource() override { std::fclose(file_); }

  std::size_t read(std::uint8_t* dst, std::size_t n) override { return std::fread(dst, 1, n, file_); }
  bool rewind() override { return std::fseek(file_, 0, SEEK_SET) == 0; }

 private:
  std::FILE* file_;
};

class BatchSink {
 public:
  virtual ~BatchSink() = default;
  /// Called once with the output schema before any batch.
  virtual void begin(const Schema& /*schema*/) {}
  virtual void consume(std::uint64_t partition, Table&& batch) = 0;
};

/// Concatenates all batches into one table.
class TableSink : public BatchSink {
 public:
  void begin(const Schema& schema) override { table_ = empty_table(schema); }
  void consume(std::uint64_t, Table&& batch) override { append_table(table_, batch); }
  Table& table() { return table_; }

 private:
  Table table_;
};

/// Instrumentation points of the double-buffered pipeline (tests only).
class PipelineObserver {
 public:
  virtual ~PipelineObserver() = default;
  virtual void fill_begin(std::size_t /*slot*/, std::uint64_t /*partition*/) {}
  virtual void fill_end(std::size_t /*slot*/, std::uint64_t /*partition*/) {}
  virtual void parse_begin(std::size_t /*slot*/, std::uint64_t /*partition*/) {}
  virtual void parse_end(std::size_t /*slot*/, std::uint64_t /*partition*/) {}
  virtual void carry_copied(std::size_t /*from_slot*/, std::size_t /*to_slot*/, std::uint64_t /*partition*/) {}
  virtual void slot_released(std::size_t /*slot*/, std::uint64_t /*partition*/) {}
  virtual void batch_delivered(std::uint64_t /*partition*/) {}
};

struct StreamConfig {
  ParseOptions parse;
  std::size_t partition_size = kDefaultPartitionSize;
  std::optional<Schema> schema;  // inferred in a pre-pass when absent
  PipelineObserver* observer = nullptr;
};

struct RunStats {
  StageTimes times;
  Diagnostics diag;
  std::uint64_t partitions = 0;
  std::uint64_t bytes_read = 0;
  Schema schema;  // input columns used for the main pass
};

namespace detail {

// Uninitialized byte buffer: untouched pages are never committed.
struct RawBuffer {
  std::unique_ptr<std::uint8_t[]> bytes;
  std::size_t size = 0;
  explicit RawBuffer(std::size_t n) : bytes(new std::uint8_t[n]), size(n) {}
};

inline std::size_t effective_partition_size(const StreamConfig& cfg) {
  std::size_t p = std::max<std::size_t>(cfg.partition_size, 2);
  if (unit_size(cfg.parse.encoding) == 2 && p % 2) ++p;
  return p;
}

[[noreturn]] inline void carry_overflow(std::uint64_t offset, std::size_t carry, std::size_t limit) {
  throw DataError("record starting at byte " + std::to_string(offset) + " exceeds the partition size (" +
                      std::to_string(carry) + " bytes pending, limit " + std::to_string(limit) +
                      "); raise --partition-size",
                  offset);
}

// Reads the source in partitions and removes skipped raw lines.
class PartitionReader {
 public:
  PartitionReader(ByteSource& src, const ParseOptions& opt, std::size_t partition_size)
      : src_(src), opt_(opt), size_(partition_size), prune_pool_(1) {}

  // Fills dst (capacity partition_size) and returns the number of bytes.
  std::size_t fill(std::uint8_t* dst, bool& eof) {
    std::size_t got = src_.read_full(dst, size_);
    bytes_read_ += got;
    eof = got < size_;
    if (!opt_.skip_rows.empty() && got > 0) {
      std::uint64_t next = 0;
      auto kept = prune_rows({dst, got}, opt_.encoding, opt_.skip_rows, row_, next, prune_pool_);
      row_ = next;
      std::memcpy(dst, kept.data(), kept.size());
      got = kept.size();
    }
    return got;
  }
  std::uint64_t bytes_read() const { return bytes_read_; }

 private:
  ByteSource& src_;
  const ParseOptions& opt_;
  std::size_t size_;
  WorkerPool prune_pool_;
  std::uint64_t row_ = 0;
  std::uint64_t bytes_read_ = 0;
};

}  // namespace detail

struct StreamInference {
  Schema schema;
  ColumnCountStats column_stats;
  std::uint64_t records = 0;
  StageTimes times;
};

/// Pre-pass: column count and per-column types over the whole source.
inline StreamInference infer_stream(ByteSource& src, const Dialect& dialect, const StreamConfig& cfg,
                                    WorkerPool& pool) {
  const std::size_t p = detail::effective_partition_size(cfg);
  detail::PartitionReader reader(src, cfg.parse, p);
  PartitionContext ctx = PartitionContext::initial(dialect.spec);
  SchemaPlan plan{std::nullopt, true};
  StreamInference res;
  std::vector<InferState> states;
  std::vector<std::uint8_t> raw(p);
  for (bool eof = false; !eof;) {
    const std::size_t got = reader.fill(raw.data(), eof);
    if (ctx.carry_over.size() > p) detail::carry_overflow(ctx.byte_offset, ctx.carry_over.size(), p);
    auto out = parse_partition(ctx, {raw.data(), got}, eof, dialect, plan, cfg.parse, pool);
    res.times += out.times;
    res.records += out.diag.records;
    res.column_stats.merge(out.diag.column_stats);
    join_inferred(states, out.inferred);
  }
  res.schema = schema_from_inference(res.column_stats.any() ? res.column_stats.max : 0, states);
  return res;
}

inline StreamInference infer_stream(ByteSource& src, const Dialect& dialect, const StreamConfig& cfg) {
  validate_options(cfg.parse);
  WorkerPool pool(cfg.parse.workers);
  return infer_stream(src, dialect, cfg, pool);
}

/// Runs read, parse and write concurrently over the source. Batches reach
/// the sink in partition order; the concatenation of all batches equals a
/// single-buffer parse of the whole input.
inline RunStats run_pipeline(ByteSource& source, BatchSink& sink, const Dialect& dialect, const StreamConfig& cfg) {
  validate_options(cfg.parse);
  const auto wall_start = std::chrono::steady_clock::now();
  RunStats stats;
  WorkerPool pool(cfg.parse.workers);
  const std::size_t p = detail::effective_partition_size(cfg);

  std::unique_ptr<SpoolSource> spool;
  ByteSource* src = &source;
  Schema schema;
  if (cfg.schema) {
    schema = *cfg.schema;
  } else {
    if (!src->rewind()) {
      spool = std::make_unique<SpoolSource>(*src);
      src = spool.get();
    }
    auto inferred = infer_stream(*src, dialect, cfg, pool);
    stats.times += inferred.times;
    schema = std::move(inferred.schema);
    if (!src->rewind()) throw IoError("cannot rewind the input after schema inference");
  }
  if (cfg.parse.selection.columns) {
    for (auto c : *cfg.parse.selection.columns) {
      if (c >= schema.size()) {
        throw ConfigError("projected column " + std::to_string(c) + " is out of range (input has " +
                          std::to_string(schema.size()) + " columns)");
      }
    }
  }
  Schema output_schema;
  if (cfg.parse.selection.columns) {
    for (auto c : *cfg.parse.selection.columns) output_schema.push_back(schema[c]);
  } else {
    output_schema = schema;
  }
  sink.begin(output_schema);
  stats.schema = schema;

  // Slot layout: [carry region (p bytes) | raw region (p bytes)].
  struct Slot {
    detail::RawBuffer buf;
    std::size_t raw_len = 0;
    bool eof = false;
    std::uint64_t partition = 0;
    bool full = false;  // filled and not yet released by the parser
    explicit Slot(std::size_t n) : buf(n) {}
    std::uint8_t* raw() { return buf.bytes.get() + buf.size / 2; }
  };
  Slot slots[2] = {Slot(2 * p), Slot(2 * p)};
  PipelineObserver* obs = cfg.observer;

  std::mutex mu;
  std::condition_variable cv;
  bool stop = false;
  std::exception_ptr error;
  std::deque<std::pair<std::uint64_t, Table>> out_queue;
  bool parse_done = false;
  double read_time = 0, write_time = 0;
  std::uint64_t bytes_read = 0;

  auto fail = [&](std::exception_ptr e) {
    std::lock_guard lk(mu);
    if (!error) error = e;
    stop = true;
    cv.notify_all();
  };

  std::thread reader([&] {
    try {
      detail::PartitionReader pr(*src, cfg.parse, p);
      for (std::uint64_t k = 0;; ++k) {
        Slot& s = slots[k % 2];
        {
          std::unique_lock lk(mu);
          cv.wait(lk, [&] { return stop || !s.full; });
          if (stop) return;
        }
        if (obs) obs->fill_begin(k % 2, k);
        bool eof = false;
        std::size_t got;
        {
          StageTimer t(read_time);
          got = pr.fill(s.raw(), eof);
        }
        if (obs) obs->fill_end(k % 2, k);
        {
          std::lock_guard lk(mu);
          s.raw_len = got;
          s.eof = eof;
          s.partition = k;
          s.full = true;
          bytes_read = pr.bytes_read();
        }
        cv.notify_all();
        if (eof) return;
      }
    } catch (...) {
      fail(std::current_exception());
    }
  });

  std::thread writer([&] {
    try {
      for (;;) {
        std::pair<std::uint64_t, Table> item;
        {
          std::unique_lock lk(mu);
          cv.wait(lk, [&] { return stop || !out_queue.empty() || parse_done; });
          if (stop) return;
          if (out_queue.empty()) return;
          item = std::move(out_queue.front());
          out_queue.pop_front();
        }
        cv.notify_all();
        StageTimer t(write_time);
        sink.consume(item.first, std::move(item.second));
        if (obs) obs->batch_delivered(item.first);
      }
    } catch (...) {
      fail(std::current_exception());
    }
  });

  try {
    PartitionContext ctx = PartitionContext::initial(dialect.spec);
    SchemaPlan plan{schema, false};
    // Carry-over of the previous partition: bytes [carry_begin, carry_end) of slot prev_slot.
    std::optional<std::size_t> prev_slot;
    const std::uint8_t* carry_ptr = nullptr;
    std::size_t carry_len = 0;
    for (std::uint64_t k = 0;; ++k) {
      const std::size_t si = k % 2;
      Slot& s = slots[si];
      {
        std::unique_lock lk(mu);
        cv.wait(lk, [&] { return stop || s.full; });
        if (stop) break;
      }
      if (carry_len > p) detail::carry_overflow(ctx.byte_offset, carry_len, p);
      std::uint8_t* data = s.raw() - carry_len;
      if (carry_len) std::memmove(data, carry_ptr, carry_len);
      if (prev_slot) {
        if (obs) obs->carry_copied(*prev_slot, si, k);
        {
          std::lock_guard lk(mu);
          slots[*prev_slot].full = false;
        }
        if (obs) obs->slot_released(*prev_slot, k - 1);
        cv.notify_all();
      }
      const std::size_t len = carry_len + s.raw_len;
      if (obs) obs->parse_begin(si, k);
      auto out = parse_partition_buffer(ctx, {data, len}, s.eof, dialect, plan, cfg.parse, pool);
      if (obs) obs->parse_end(si, k);
      stats.times += out.times;
      stats.diag.merge(out.diag);
      ++stats.partitions;
      carry_ptr = data + out.cut;
      carry_len = len - out.cut;
      prev_slot = si;
      {
        std::lock_guard lk(mu);
        out_queue.emplace_back(k, std::move(out.table));
      }
      cv.notify_all();
      if (s.eof) {
        std::lock_guard lk(mu);
        s.full = false;
        break;
      }
    }
  } catch (...) {
    fail(std::current_exception());
  }
  {
    std::lock_guard lk(mu);
    parse_done = true;
  }
  cv.notify_all();
  reader.join();
  writer.join();
  if (error) std::rethrow_exception(error);

  stats.bytes_read = bytes_read;
  stats.times.read += read_time;
  stats.times.write += write_time;
  stats.times.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return stats;
}

}  // namespace dsvpar
