#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <span>
#include <thread>
#include <vector>

namespace eescreen {

namespace detail {

inline constexpr std::size_t kPairwiseBlock = 16;

// Fixed-order sum of one chunk; four lanes break the add dependency chain.
template <class Term>
double chunk_sum(std::size_t first, std::size_t last, const Term& term) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = first;
    for (; i + 4 <= last; i += 4) {
        acc[0] += term(i);
        acc[1] += term(i + 1);
        acc[2] += term(i + 2);
        acc[3] += term(i + 3);
    }
    for (std::size_t k = 0; i < last; ++i, ++k) acc[k] += term(i);
    return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

inline constexpr std::size_t kPairwiseChunks = 16;

template <class Term>
double pairwise_reduce(std::size_t first, std::size_t last, const Term& term) {
    const std::size_t len = last - first;
    if (len <= kPairwiseBlock * kPairwiseChunks) {
        double sums[kPairwiseChunks];
        std::size_t k = 0;
        for (std::size_t c = first; c < last; c += kPairwiseBlock) {
            sums[k++] = chunk_sum(c, std::min(c + kPairwiseBlock, last), term);
        }
        // Balanced tree over the chunk sums.
        while (k > 1) {
            std::size_t m = 0;
            for (std::size_t i = 0; i + 1 < k; i += 2) sums[m++] = sums[i] + sums[i + 1];
            if (k % 2) sums[m++] = sums[k - 1];
            k = m;
        }
        return k ? sums[0] : 0.0;
    }
    const std::size_t mid = first + len / 2;
    return pairwise_reduce(first, mid, term) + pairwise_reduce(mid, last, term);
}

}  // namespace detail

// Pairwise (cascade) summation. The split points depend only on the length,
// so results are reproducible regardless of how columns are scheduled.
inline double pairwise_sum(std::span<const double> v) {
    return detail::pairwise_reduce(0, v.size(), [&](std::size_t i) { return v[i]; });
}

inline double pairwise_dot(std::span<const double> a, std::span<const double> b) {
    return detail::pairwise_reduce(0, a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}

template <class Term>
double pairwise_sum_of(std::size_t n, const Term& term) {
    return detail::pairwise_reduce(0, n, term);
}

// Thread count from an explicit request, then EESCREEN_THREADS, then 1.
inline unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("EESCREEN_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return 1;
}

// Static block partition of [0, n). Each index is processed exactly once and
// the body must only write to slots owned by that index.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    pool.clear();
    if (first_error) std::rethrow_exception(first_error);
}

// Logistic link with the linear predictor capped at +-30.
inline constexpr double kLinkCap = 30.0;

inline double expit(double eta) {
    eta = std::clamp(eta, -kLinkCap, kLinkCap);
    if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Sample quantile with linear interpolation between order statistics
// (the "type 7" definition).
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const double h = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace eescreen
