#include <chrono>
#include <random>
#include <stdexcept>
#include <thread>

#include "doctest.h"
#include "ocml/runtime.hpp"

using namespace ocml;

TEST_CASE("results come back in submission order") {
  Executor exec(2);
  std::vector<std::function<int()>> tasks{[] { return 1; }, [] { return 2; }, [] { return 3; }};
  CHECK(exec.submit_all(tasks) == std::vector<int>{1, 2, 3});
}

TEST_CASE("worker count does not change results") {
  std::vector<std::function<double()>> tasks;
  for (int i = 0; i < 64; ++i) {
    tasks.emplace_back([i] {
      std::mt19937_64 rng(static_cast<std::uint64_t>(i));
      double acc = 0;
      for (int k = 0; k < 1000; ++k) acc += std::uniform_real_distribution<double>(0, 1)(rng);
      if (i % 7 == 0) std::this_thread::sleep_for(std::chrono::microseconds(200));
      return acc;
    });
  }
  Executor seq(1), par(8);
  CHECK(seq.submit_all(tasks) == par.submit_all(tasks));
}

TEST_CASE("a failing task aborts the batch and names its index") {
  for (std::size_t workers : {1u, 4u}) {
    Executor exec(workers);
    std::vector<std::function<int()>> tasks;
    for (int i = 0; i < 10; ++i) {
      tasks.emplace_back([i]() -> int {
        if (i == 6) throw std::runtime_error("boom");
        return i;
      });
    }
    try {
      exec.submit_all(tasks);
      FAIL("expected TaskError");
    } catch (const TaskError& e) {
      CHECK(e.index() == 6);
      CHECK(std::string(e.what()).find("boom") != std::string::npos);
    }
  }
}

TEST_CASE("the lowest failing index is reported") {
  Executor exec(4);
  std::vector<std::function<int()>> tasks;
  for (int i = 0; i < 40; ++i) {
    tasks.emplace_back([i]() -> int {
      if (i >= 5) throw std::runtime_error("fail " + std::to_string(i));
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
      return i;
    });
  }
  CHECK_THROWS_WITH_AS(exec.submit_all(tasks), doctest::Contains("task 5 failed"), TaskError);
}

TEST_CASE("counters track submissions and bounded concurrency") {
  Executor exec(3);
  std::vector<std::function<int()>> tasks;
  for (int i = 0; i < 12; ++i) {
    tasks.emplace_back([i] {
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
      return i;
    });
  }
  exec.submit_all(tasks);
  exec.submit_all(tasks);
  const auto c = exec.counters();
  CHECK(c.tasks_submitted == 24);
  CHECK(c.tasks_completed == 24);
  CHECK(c.max_concurrent >= 1);
  CHECK(c.max_concurrent <= 3);
}

TEST_CASE("sequential executor never runs tasks concurrently") {
  Executor exec(1);
  std::vector<std::function<int()>> tasks(20, [] { return 0; });
  exec.submit_all(tasks);
  CHECK(exec.counters().max_concurrent == 1);
}

TEST_CASE("nested batches from inside a task run inline") {
  Executor exec(2);
  std::vector<std::function<int()>> outer;
  for (int i = 0; i < 4; ++i) {
    outer.emplace_back([&exec, i] {
      std::vector<std::function<int()>> inner{[i] { return i; }, [i] { return 10 * i; }};
      const auto r = exec.submit_all(inner);
      return r[0] + r[1];
    });
  }
  CHECK(exec.submit_all(outer) == std::vector<int>{0, 11, 22, 33});
}

TEST_CASE("empty batch") {
  Executor exec(4);
  CHECK(exec.submit_all(std::vector<std::function<int()>>{}).empty());
}
