#pragma once

// Deterministic fork-join helpers. Work is split into contiguous index
// chunks; callers write results into per-index slots so the outcome does not
// depend on the number of workers.

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace rsc {

/// Worker count from the RSC_WORKERS environment variable, 1 when unset or invalid.
inline int default_workers() {
    if (const char* env = std::getenv("RSC_WORKERS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return n;
        } catch (...) {
        }
    }
    return 1;
}

template <typename F>
void parallel_for(std::size_t count, int workers, F&& body) {
    const std::size_t n_workers =
        std::min<std::size_t>(count, static_cast<std::size_t>(std::max(workers, 1)));
    if (n_workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n_workers);
    {
        std::vector<std::jthread> pool;
        pool.reserve(n_workers);
        const std::size_t chunk = (count + n_workers - 1) / n_workers;
        for (std::size_t w = 0; w < n_workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(count, begin + chunk);
            pool.emplace_back([&, w, begin, end] {
                try {
                    for (std::size_t i = begin; i < end; ++i) body(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    // Lowest chunk wins so the reported error is scheduling-independent.
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Pairwise (tree) summation in index order.
template <typename T, typename Get>
T pairwise_sum(std::size_t begin, std::size_t end, Get&& get) {
    if (end <= begin) return T{};
    if (end - begin <= 8) {
        T s = get(begin);
        for (std::size_t i = begin + 1; i < end; ++i) s += get(i);
        return s;
    }
    const std::size_t mid = begin + (end - begin) / 2;
    return pairwise_sum<T>(begin, mid, get) + pairwise_sum<T>(mid, end, get);
}

inline double pairwise_sum(const std::vector<double>& values) {
    return pairwise_sum<double>(0, values.size(), [&](std::size_t i) { return values[i]; });
}

}  // namespace rsc
