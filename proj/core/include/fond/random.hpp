#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace fond {

// Mixes a base seed with a stream id (splitmix64 finalizer). Used to give every
// consumer (init, sampler, dropout, repetition r, fold k, ...) its own seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Seeded generator whose outputs are identical across standard libraries:
// mt19937_64 is fully specified, and the distributions below are implemented
// here instead of using the implementation-defined <random> distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; one variate per call.
    double normal();

    // Unbiased index in [0, n).
    std::size_t index(std::size_t n);

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::swap(values[i - 1], values[index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace fond
