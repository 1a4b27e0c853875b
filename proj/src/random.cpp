#include "spearmm/random.hpp"

#include <cmath>
#include <numbers>

namespace spearmm {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index) {
    // FNV-1a over the label, then mixed with seed and index
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : label) {
        h = (h ^ c) * 0x100000001b3ull;
    }
    return splitmix64(splitmix64(seed ^ h) + index);
}

std::uint64_t CounterRng::next_u64() {
    return splitmix64(key_ + (counter_++) * kGolden);
}

double CounterRng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = -n % n; // 2^64 mod n
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= limit) return r % n;
    }
}

double CounterRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace spearmm
