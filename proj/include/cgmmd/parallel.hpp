#pragma once

#include <cstddef>
#include <functional>

namespace cgmmd {

/// Process-wide worker count used by the data-parallel loops (kNN queries,
/// gram rows, estimator row sums). Defaults to 1.
void set_thread_count(std::size_t threads);
std::size_t thread_count() noexcept;

/// Calls body(i) for i in [begin, end), split into contiguous blocks across
/// thread_count() workers. Bodies must write only to per-index outputs, so the
/// result never depends on the number of threads.
void parallel_for(std::size_t begin, std::size_t end, const std::function<void(std::size_t)>& body);

}  // namespace cgmmd
