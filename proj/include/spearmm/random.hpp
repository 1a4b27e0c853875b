#pragma once

#include <cstdint>
#include <string_view>

namespace spearmm {

std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent stream key from a root seed and a label.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

// Counter-based generator: the i-th draw is splitmix64(key + i * golden).
// Bit-identical on every platform; conversions avoid <random> distributions,
// whose output is implementation-defined.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64();
    double uniform();                       // [0, 1)
    std::uint64_t below(std::uint64_t n);   // [0, n), unbiased
    double normal();                        // N(0, 1)

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace spearmm
