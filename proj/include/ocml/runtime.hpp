#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ocml {

// Raised by submit_all when a task throws. `index` is the position of the
// lowest-indexed failing task in the batch.
class TaskError : public std::runtime_error {
 public:
  TaskError(std::size_t index, const std::string& what, std::exception_ptr cause)
      : std::runtime_error("task " + std::to_string(index) + " failed: " + what), index_(index),
        cause_(std::move(cause)) {}
  std::size_t index() const { return index_; }
  const std::exception_ptr& cause() const { return cause_; }

 private:
  std::size_t index_;
  std::exception_ptr cause_;
};

struct ExecutorCounters {
  std::uint64_t tasks_submitted = 0;
  std::uint64_t tasks_completed = 0;
  std::uint64_t max_concurrent = 0;
};

// Worker pool for batches of pure tasks. Tasks are pulled in submission order
// from a shared queue; results are returned positionally, so the outcome never
// depends on which worker ran what. workers == 1 runs every task inline.
//
// A batch submitted from inside one of this pool's own tasks runs inline on
// the calling worker.
class Executor {
 public:
  explicit Executor(std::size_t workers = 1);
  ~Executor();
  Executor(const Executor&) = delete;
  Executor& operator=(const Executor&) = delete;

  std::size_t workers() const { return workers_; }
  ExecutorCounters counters() const;

  template <class R>
  std::vector<R> submit_all(const std::vector<std::function<R()>>& tasks);

 private:
  // Runs body(i) for i in [0, count). Returns the lowest failing index and its
  // exception, if any; tasks not yet started when a failure is seen are skipped.
  std::optional<std::pair<std::size_t, std::exception_ptr>> run_batch(
      std::size_t count, const std::function<void(std::size_t)>& body);
  void worker_loop();
  bool on_worker_thread() const;
  void task_started();
  void task_finished();

  std::size_t workers_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> queue_;
  bool stopping_ = false;

  std::atomic<std::uint64_t> submitted_{0};
  std::atomic<std::uint64_t> completed_{0};
  std::atomic<std::uint64_t> running_{0};
  std::atomic<std::uint64_t> max_running_{0};
};

template <class R>
std::vector<R> Executor::submit_all(const std::vector<std::function<R()>>& tasks) {
  std::vector<std::optional<R>> slots(tasks.size());
  auto failure = run_batch(tasks.size(), [&](std::size_t i) { slots[i].emplace(tasks[i]()); });
  if (failure) {
    std::string what = "unknown exception";
    try {
      std::rethrow_exception(failure->second);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    throw TaskError(failure->first, what, failure->second);
  }
  std::vector<R> out;
  out.reserve(tasks.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace ocml
