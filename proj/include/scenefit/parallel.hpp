#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <span>
#include <vector>

namespace scenefit {

// Thread count used by all parallel kernels. Resolution order:
// set_thread_cap() value if positive, else the SCENEFIT_THREADS environment
// variable, else the OpenMP default.
int thread_count();
void set_thread_cap(int n);

// Runs f(i) for i in [0, n). Parallel when OpenMP is available and n is large
// enough to be worth it. Exceptions thrown by f are captured and the one with
// the lowest index is rethrown after all iterations finish, so results do not
// depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

// Fixed-order pairwise (tree) summation. Deterministic for a given input
// order regardless of thread count, and far more accurate than sequential
// accumulation on long sums.
double pairwise_sum(std::span<const double> values);

// Serial reference implementations used by tests and the benchmark target.
void serial_for(std::size_t n, const std::function<void(std::size_t)>& f);
double sequential_sum(std::span<const double> values);

}  // namespace scenefit
