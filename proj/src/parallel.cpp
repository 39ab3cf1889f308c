#include "cgmmd/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cgmmd {

namespace {
std::atomic<std::size_t> g_threads{1};
constexpr std::size_t kMinBlock = 64;
}  // namespace

void set_thread_count(std::size_t threads) {
  g_threads.store(std::max<std::size_t>(1, threads));
}

std::size_t thread_count() noexcept {
  return g_threads.load();
}

void parallel_for(std::size_t begin, std::size_t end, const std::function<void(std::size_t)>& body) {
  if (end <= begin) {
    return;
  }
  const std::size_t n = end - begin;
  const std::size_t workers = std::min(thread_count(), (n + kMinBlock - 1) / kMinBlock);
  if (workers <= 1) {
    for (std::size_t i = begin; i < end; ++i) {
      body(i);
    }
    return;
  }

  std::exception_ptr failure;
  std::mutex failure_mutex;
  const std::size_t block = (n + workers - 1) / workers;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t lo = begin + w * block;
      const std::size_t hi = std::min(end, lo + block);
      pool.emplace_back([&, lo, hi] {
        try {
          for (std::size_t i = lo; i < hi; ++i) {
            body(i);
          }
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) {
            failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

}  // namespace cgmmd
