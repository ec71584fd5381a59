#include "scenefit/parallel.hpp"

#include <omp.h>

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <mutex>

namespace scenefit {

namespace {

int g_cap = 0;

int env_threads() {
    const char* s = std::getenv("SCENEFIT_THREADS");
    if (!s || !*s) return 0;
    char* end = nullptr;
    long v = std::strtol(s, &end, 10);
    if (end == s || v <= 0) return 0;
    return static_cast<int>(v);
}

}  // namespace

void set_thread_cap(int n) { g_cap = n > 0 ? n : 0; }

int thread_count() {
    if (g_cap > 0) return g_cap;
    if (int v = env_threads(); v > 0) return v;
    return omp_get_max_threads();
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f) {
    if (n == 0) return;
    const int nt = thread_count();
    if (nt <= 1 || n < 2) {
        serial_for(n, f);
        return;
    }
    std::exception_ptr first_error = nullptr;
    std::int64_t first_error_index = -1;
    std::mutex error_mutex;
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        try {
            f(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (first_error_index < 0 || i < first_error_index) {
                first_error_index = i;
                first_error = std::current_exception();
            }
        }
    }
    if (first_error) std::rethrow_exception(first_error);
}

void serial_for(std::size_t n, const std::function<void(std::size_t)>& f) {
    for (std::size_t i = 0; i < n; ++i) f(i);
}

namespace {

double pairwise_sum_range(const double* v, std::size_t n) {
    if (n <= 16) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum_range(v, half) + pairwise_sum_range(v + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
    return pairwise_sum_range(values.data(), values.size());
}

double sequential_sum(std::span<const double> values) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
}

}  // namespace scenefit
