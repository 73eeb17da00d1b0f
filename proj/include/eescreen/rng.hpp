#pragma once

#include <cstdint>
#include <limits>

namespace eescreen {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

enum class StreamTag : std::uint64_t {
    covariates = 1,
    errors = 2,
    censoring = 3,
    test_covariates = 4,
    pilot = 5,
    test_errors = 6,
    test_censoring = 7,
};

/// Counter-based generator: the k-th output is a pure function of (key, k),
/// so any stream can be recreated from its key alone. Satisfies
/// UniformRandomBitGenerator for use with the <random> distributions.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept { return mix64(key_ ^ mix64(counter_++)); }

    constexpr std::uint64_t key() const noexcept { return key_; }
    constexpr std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Stream for replication `rep`: keyed on base_seed xor rep, then split by tag.
constexpr CounterRng make_stream(std::uint64_t base_seed, std::uint64_t rep, StreamTag tag) noexcept {
    return CounterRng(mix64(mix64(base_seed ^ rep) + static_cast<std::uint64_t>(tag)));
}

}  // namespace eescreen
