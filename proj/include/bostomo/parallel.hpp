#pragma once

#include <cstddef>
#include <functional>

namespace bos {

/// Worker count used by parallel_for. Resolution order: explicit set_threads(),
/// then BOS_TOMO_THREADS, then 1.
int thread_count();
void set_threads(int n);

/// Runs body(i) for i in [0, n) on up to thread_count() workers using static
/// contiguous chunks. Callers write results into per-index slots and reduce
/// afterwards in index order, so output never depends on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace bos
