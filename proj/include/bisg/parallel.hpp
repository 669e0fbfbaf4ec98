#ifndef BISG_PARALLEL_HPP
#define BISG_PARALLEL_HPP

#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bisg {

// Fixed chunk size so partial sums are identical regardless of thread count.
inline constexpr std::size_t kReduceChunk = 4096;

// Serial reference. Plain left-to-right accumulation.
template <typename F>
double chunked_sum_serial(std::size_t n, F f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += f(i);
    return acc;
}

// Deterministic parallel reduction: each fixed-size chunk is summed
// sequentially, then chunk partials are combined in index order.  The
// result is bit-identical for any number of threads.
template <typename F>
double chunked_sum(std::size_t n, F f) {
    if (n == 0) return 0.0;
    const std::size_t nchunks = (n + kReduceChunk - 1) / kReduceChunk;
    std::vector<double> partial(nchunks, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long long c = 0; c < static_cast<long long>(nchunks); ++c) {
        const std::size_t lo = static_cast<std::size_t>(c) * kReduceChunk;
        const std::size_t hi = lo + kReduceChunk < n ? lo + kReduceChunk : n;
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += f(i);
        partial[static_cast<std::size_t>(c)] = acc;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

// Element-wise map over [0, n); bodies must write disjoint locations.
template <typename F>
void parallel_for(std::size_t n, F f) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        f(static_cast<std::size_t>(i));
}

template <typename F>
void parallel_for_serial(std::size_t n, F f) {
    for (std::size_t i = 0; i < n; ++i) f(i);
}

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace bisg

#endif
