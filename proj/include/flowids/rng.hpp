#pragma once

#include <cstdint>
#include <vector>

#include "flowids/errors.hpp"

namespace flowids {

// SplitMix64 pseudo-random generator.
//
// Recurrence (Steele, Lea & Flood 2014):
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   output = z ^ (z >> 31)
//
// Pure 64-bit integer arithmetic, so the sequence is identical on every
// platform for a given seed. split() draws one value from the parent and
// uses it as the child's seed, giving an independent stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform draw in [0, 1): top 53 bits scaled by 2^-53.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        if (!(lo < hi)) {
            throw ParameterError("rng: uniform range requires lo < hi");
        }
        return lo + (hi - lo) * uniform();
    }

    // Unbiased-enough bounded draw for index work (modulo; bias < 2^-53 here).
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    Rng split() { return Rng(next_u64()); }

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

// Fisher-Yates shuffle driven by Rng; deterministic for a fixed seed.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace flowids
