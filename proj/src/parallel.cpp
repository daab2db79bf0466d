#include "finelab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

namespace finelab {

namespace {

std::atomic<std::size_t> g_override{0};
thread_local bool t_in_worker = false;

std::size_t env_threads() {
  if (const char* env = std::getenv("FINELAB_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

}  // namespace

std::size_t thread_count() {
  const std::size_t o = g_override.load();
  return o != 0 ? o : env_threads();
}

void set_thread_count(std::size_t n) { g_override.store(n); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task) {
  // Nested calls run inline on the calling worker.
  const std::size_t workers = t_in_worker ? 1 : std::min(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&] {
    const bool outer = t_in_worker;
    t_in_worker = true;
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
    t_in_worker = outer;
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

double chunked_sum(std::size_t n, const std::function<double(std::size_t, std::size_t)>& chunk_sum,
                   std::size_t chunk) {
  if (n == 0) return 0.0;
  const std::size_t chunks = (n + chunk - 1) / chunk;
  if (chunks == 1) return chunk_sum(0, n);
  std::vector<double> partial(chunks, 0.0);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t lo = c * chunk;
    partial[c] = chunk_sum(lo, std::min(n, lo + chunk));
  });
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

}  // namespace finelab
