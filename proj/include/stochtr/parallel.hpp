#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace stochtr {

/// Worker count: STOCHTR_THREADS if set, else hardware concurrency.
/// Only affects speed; every reduction in the library has a fixed order.
unsigned thread_count();

/// Runs body(i) for i in [0, n) over contiguous chunks on thread_count() threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Fixed-tree pairwise sum; result depends only on the values and their order.
double pairwise_sum(std::span<const double> v);

}  // namespace stochtr
