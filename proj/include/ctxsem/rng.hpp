#pragma once

#include <cstdint>

namespace ctxsem {

// SplitMix64. Deterministic across platforms, unlike the std::
// distributions, which is what the byte-for-byte reproducibility
// contracts of corpus mixing, training and bootstrapping need.
struct SplitMix64 {
    std::uint64_t state = 0;

    explicit SplitMix64(std::uint64_t seed = 0) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n), n > 0 (Lemire multiply-shift)
    std::uint64_t bounded(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }
};

// Derives an independent stream from a base seed, e.g. one per worker
// or per bootstrap resample.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 r(seed ^ (0xA0761D6478BD642FULL + stream * 0xE7037ED1A0B428DBULL));
    r.next();
    return r.next();
}

// In-place Fisher-Yates; spelled out so shuffles do not depend on the
// standard library's unspecified std::shuffle algorithm.
template <typename Vec>
void deterministic_shuffle(Vec& v, SplitMix64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.bounded(i));
        using std::swap;
        swap(v[i - 1], v[j]);
    }
}

} // namespace ctxsem
