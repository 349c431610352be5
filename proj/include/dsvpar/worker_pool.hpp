#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <type_traits>
#include <vector>

#include "dsvpar/error.hpp"

namespace dsvpar {

// Fixed set of worker threads executing index-parallel loops. The calling
// thread participates, so a pool of size 1 never spawns a thread.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers = 1) {
    if (workers == 0) throw ConfigError("worker count must be at least 1");
    threads_.reserve(workers - 1);
    for (std::size_t i = 1; i < workers; ++i) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    {
      std::lock_guard lk(mu_);
      stop_ = true;
    }
    wake_.notify_all();
    for (auto& t : threads_) t.join();
  }

  std::size_t size() const { return threads_.size() + 1; }

  /// Runs fn(i) for every i in [0, tasks) and blocks until all have finished.
  /// The first exception thrown by any task is rethrown here.
  template <class Fn>
  void parallel_for(std::size_t tasks, Fn&& fn) {
    if (tasks == 0) return;
    if (threads_.empty() || tasks == 1 || in_worker()) {
      for (std::size_t i = 0; i < tasks; ++i) fn(i);
      return;
    }
    using F = std::remove_reference_t<Fn>;
    Job job;
    job.ctx = const_cast<void*>(static_cast<const void*>(&fn));
    job.invoke = [](void* ctx, std::size_t i) { (*static_cast<F*>(ctx))(i); };
    job.tasks = tasks;

    std::lock_guard submit(submit_mu_);
    {
      std::lock_guard lk(mu_);
      job_ = &job;
      ++generation_;
    }
    wake_.notify_all();
    run(job);
    {
      std::unique_lock lk(mu_);
      job_ = nullptr;
      idle_.wait(lk, [&] { return busy_ == 0; });
    }
    if (job.error) std::rethrow_exception(job.error);
  }

  /// Splits [0, n) into contiguous blocks of `block` items and runs
  /// fn(begin, end) per block.
  template <class Fn>
  void for_each_block(std::size_t n, std::size_t block, Fn&& fn) {
    if (n == 0) return;
    block = std::max<std::size_t>(block, 1);
    const std::size_t blocks = (n + block - 1) / block;
    parallel_for(blocks, [&](std::size_t b) {
      const std::size_t begin = b * block;
      fn(begin, std::min(n, begin + block));
    });
  }

 private:
  struct Job {
    void (*invoke)(void*, std::size_t) = nullptr;
    void* ctx = nullptr;
    std::size_t tasks = 0;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mu;
    std::exception_ptr error;
  };

  static bool& in_worker() {
    thread_local bool flag = false;
    return flag;
  }

  static void run(Job& job) {
    const bool was_worker = in_worker();
    in_worker() = true;
    for (;;) {
      const std::size_t i = job.next.fetch_add(1, std::memory_order_relaxed);
      if (i >= job.tasks) break;
      if (job.failed.load(std::memory_order_relaxed)) continue;
      try {
        job.invoke(job.ctx, i);
      } catch (...) {
        std::lock_guard lk(job.error_mu);
        if (!job.error) job.error = std::current_exception();
        job.failed.store(true, std::memory_order_relaxed);
      }
    }
    in_worker() = was_worker;
  }

  void worker_loop() {
    std::uint64_t seen = 0;
    std::unique_lock lk(mu_);
    for (;;) {
      wake_.wait(lk, [&] { return stop_ || (job_ != nullptr && seen != generation_); });
      if (stop_) return;
      seen = generation_;
      Job* job = job_;
      ++busy_;
      lk.unlock();
      run(*job);
      lk.lock();
      if (--busy_ == 0) idle_.notify_all();
    }
  }

  std::vector<std::thread> threads_;
  std::mutex submit_mu_;
  std::mutex mu_;
  std::condition_variable wake_;
  std::condition_variable idle_;
  Job* job_ = nullptr;
  std::uint64_t generation_ = 0;
  std::size_t busy_ = 0;
  bool stop_ = false;
};

}  // namespace dsvpar
