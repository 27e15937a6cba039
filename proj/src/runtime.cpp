#include "ocml/runtime.hpp"

#include <algorithm>
#include <memory>

namespace ocml {

namespace {
thread_local const Executor* current_pool = nullptr;
}

Executor::Executor(std::size_t workers) : workers_(workers == 0 ? 1 : workers) {
  if (workers_ > 1) {
    threads_.reserve(workers_);
    for (std::size_t w = 0; w < workers_; ++w) threads_.emplace_back([this] { worker_loop(); });
  }
}

Executor::~Executor() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

ExecutorCounters Executor::counters() const {
  return {submitted_.load(), completed_.load(), max_running_.load()};
}

bool Executor::on_worker_thread() const { return current_pool == this; }

void Executor::worker_loop() {
  current_pool = this;
  while (true) {
    std::function<void()> job;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      job = std::move(queue_.front());
      queue_.pop_front();
    }
    job();
  }
}

void Executor::task_started() {
  const auto now = running_.fetch_add(1) + 1;
  auto prev = max_running_.load();
  while (prev < now && !max_running_.compare_exchange_weak(prev, now)) {
  }
}

void Executor::task_finished() {
  running_.fetch_sub(1);
  completed_.fetch_add(1);
}

std::optional<std::pair<std::size_t, std::exception_ptr>> Executor::run_batch(
    std::size_t count, const std::function<void(std::size_t)>& body) {
  submitted_.fetch_add(count);

  struct Batch {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex mu;
    std::condition_variable done_cv;
    std::size_t runners_left = 0;
    std::size_t fail_index = 0;
    std::exception_ptr fail_error;
  };
  auto batch = std::make_shared<Batch>();

  auto record = [&batch](std::size_t i, std::exception_ptr e) {
    std::lock_guard lock(batch->mu);
    if (!batch->fail_error || i < batch->fail_index) {
      batch->fail_index = i;
      batch->fail_error = std::move(e);
    }
    batch->failed = true;
  };
  auto runner = [this, &body, batch, count, record] {
    while (true) {
      const std::size_t i = batch->next.fetch_add(1);
      if (i >= count || batch->failed.load()) break;
      task_started();
      try {
        body(i);
      } catch (...) {
        record(i, std::current_exception());
      }
      task_finished();
    }
  };

  if (workers_ == 1 || on_worker_thread() || count <= 1) {
    runner();
  } else {
    const std::size_t n_runners = std::min(workers_, count);
    batch->runners_left = n_runners;
    {
      std::lock_guard lock(mu_);
      for (std::size_t r = 0; r < n_runners; ++r) {
        queue_.emplace_back([runner, batch] {
          runner();
          std::lock_guard l(batch->mu);
          if (--batch->runners_left == 0) batch->done_cv.notify_all();
        });
      }
    }
    cv_.notify_all();
    std::unique_lock lock(batch->mu);
    batch->done_cv.wait(lock, [&] { return batch->runners_left == 0; });
  }

  if (batch->fail_error) return std::make_pair(batch->fail_index, batch->fail_error);
  return std::nullopt;
}

}  // namespace ocml
