#pragma once

#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tpd::par {

enum class Mode { Serial, OpenMP };

inline Mode default_mode() {
#ifdef _OPENMP
    return Mode::OpenMP;
#else
    return Mode::Serial;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// Points per reduction block. Reductions are accumulated per block in index
// order and the block partials are folded in a fixed pairwise order, so
// results are identical for any thread count, including the serial
// reference path.
inline constexpr std::size_t kBlockSize = 64;

inline std::size_t block_count(std::size_t n) { return (n + kBlockSize - 1) / kBlockSize; }

// Runs body(block_index, begin, end) over [0, n) split into kBlockSize
// chunks. Mode::Serial is the reference implementation; Mode::OpenMP must
// produce bit-identical results because each block is still processed
// sequentially by exactly one thread.
template <class Body>
void for_each_block(std::size_t n, Mode mode, Body&& body) {
    const std::size_t nblocks = block_count(n);
    if (mode == Mode::Serial) {
        for (std::size_t b = 0; b < nblocks; ++b)
            body(b, b * kBlockSize, std::min(n, (b + 1) * kBlockSize));
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (long long b = 0; b < static_cast<long long>(nblocks); ++b) {
        const std::size_t ub = static_cast<std::size_t>(b);
        body(ub, ub * kBlockSize, std::min(n, (ub + 1) * kBlockSize));
    }
#else
    for (std::size_t b = 0; b < nblocks; ++b)
        body(b, b * kBlockSize, std::min(n, (b + 1) * kBlockSize));
#endif
}

// Fixed-order pairwise fold: parts[0] ends up holding the total. add(a, b)
// must accumulate b into a.
template <class T, class Add>
void tree_fold(std::vector<T>& parts, Add&& add) {
    if (parts.empty()) return;
    for (std::size_t stride = 1; stride < parts.size(); stride *= 2)
        for (std::size_t i = 0; i + stride < parts.size(); i += 2 * stride)
            add(parts[i], parts[i + stride]);
}

}  // namespace tpd::par
