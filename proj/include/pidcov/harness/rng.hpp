#pragma once

// Counter-based SplitMix64: output k of stream s under seed x is
// mix(x, s, k), so every stream can be regenerated independently.

#include <cstdint>
#include <limits>

namespace pidcov {

class SplitMix64 {
public:
    using result_type = std::uint64_t;
    static constexpr const char* kName = "splitmix64-counter";

    explicit SplitMix64(std::uint64_t seed, std::uint64_t stream = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

} // namespace pidcov
