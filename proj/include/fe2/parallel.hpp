#ifndef FE2_PARALLEL_HPP
#define FE2_PARALLEL_HPP

#include <algorithm>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fe2 {

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline int thread_id() {
#ifdef _OPENMP
    return omp_get_thread_num();
#else
    return 0;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

/// Runs compute(item, slot) in parallel over batches of `batch` items, then
/// consume(item, slot) serially in item order, so reductions done in consume
/// do not depend on the thread count. The first failing item (by index) of a
/// batch has its exception rethrown after the batch finished.
template <class Compute, class Consume>
void batched_for(int n_items, int batch, Compute&& compute, Consume&& consume) {
    batch = std::max(1, batch);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(std::min(n_items, batch)));
    for (int start = 0; start < n_items; start += batch) {
        const int end = std::min(n_items, start + batch);
        std::fill(errors.begin(), errors.end(), nullptr);
#pragma omp parallel for schedule(dynamic)
        for (int item = start; item < end; ++item) {
            try {
                compute(item, item - start);
            } catch (...) {
                errors[item - start] = std::current_exception();
            }
        }
        for (int item = start; item < end; ++item) {
            if (errors[item - start]) std::rethrow_exception(errors[item - start]);
        }
        for (int item = start; item < end; ++item) consume(item, item - start);
    }
}

}  // namespace fe2

#endif
