#pragma once

#include <cstddef>
#include <functional>

namespace lambda_lab {

/// Worker count: LAMBDA_LAB_THREADS if set to a positive integer, else the
/// hardware concurrency.
int thread_count();

/// Runs body(i) for i in [0, n) on up to thread_count() threads. Every index
/// runs exactly once; results must be written to per-index slots so that the
/// outcome does not depend on scheduling. The first exception is rethrown
/// after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace lambda_lab
