#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace nashbsde {

/// Number of worker threads used by path loops. 0 selects hardware concurrency.
void set_thread_count(int threads);
int thread_count();

/// Fixed work-chunk size. Chunk boundaries never depend on the thread count,
/// so per-chunk partial results reduce identically for any number of workers.
inline constexpr std::size_t kChunkSize = 2048;

/// Runs body(begin, end) over [0, n) split into kChunkSize chunks.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

/// Sums body(begin, end) over chunks and reduces the partial sums in chunk
/// order. Result is bitwise independent of the thread count.
double chunked_sum(std::size_t n, const std::function<double(std::size_t, std::size_t)>& body);

}  // namespace nashbsde
