#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace finelab {

/// Worker count for internal loops. Read from FINELAB_THREADS when set,
/// otherwise the hardware concurrency. Never changes numerical results.
std::size_t thread_count();

/// Override for tests and embedding; 0 restores the environment default.
void set_thread_count(std::size_t n);

/// Runs task(i) for i in [0, n). Tasks must write to disjoint outputs.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task);

/// Deterministic reduction: the index range is cut into fixed-size chunks,
/// each chunk is summed sequentially and the chunk partials are added in
/// chunk order, so the result does not depend on the worker count.
double chunked_sum(std::size_t n, const std::function<double(std::size_t, std::size_t)>& chunk_sum,
                   std::size_t chunk = 8192);

}  // namespace finelab
