#pragma once

#include <cstdint>
#include <vector>

namespace ood {

/// Seeded PRNG used everywhere randomness is needed, so that runs are
/// reproducible from a single 64-bit seed and the stream can be matched by
/// other implementations.
///
/// Algorithm: splitmix64 (Steele, Lea, Flood 2014). Test vectors for
/// seed 0: 0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F.
struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). Plain modulo; the bias for n << 2^64 is
    /// negligible at the sizes used here and the mapping is trivially
    /// portable.
    std::uint64_t next_below(std::uint64_t n) {
        return next() % n;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    /// Derived stream seed: mixes the parent seed with a stream index so
    /// distinct indices give decorrelated child generators.
    std::uint64_t sub_seed(std::uint64_t stream) const {
        Rng child(state ^ (0xD1342543DE82EF95ULL * (stream + 1)));
        return child.next();
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next_below(i);
            std::swap(v[i - 1], v[j]);
        }
    }
};

}  // namespace ood
