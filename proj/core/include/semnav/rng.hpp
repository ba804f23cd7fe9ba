#pragma once

#include <cmath>
#include <cstdint>

namespace semnav {

// Deterministic PRNG with a fixed cross-platform output sequence.
// std::mt19937 distributions are implementation-defined, so every sampled
// quantity in the project goes through this instead.
struct SplitMix64 {
    uint64_t state;

    explicit SplitMix64(uint64_t seed = 0x9E3779B97F4A7C15ULL) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t bounded(uint64_t n) { return n == 0 ? 0 : next() % n; }

    int range(int lo, int hi_inclusive) {
        return lo + static_cast<int>(bounded(static_cast<uint64_t>(hi_inclusive - lo + 1)));
    }

    // standard normal via Box-Muller; one value per call, deterministic stream
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }
};

// Stable seed mixing for derived streams (per frame, per detection, ...).
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
    z ^= z >> 33;
    z *= 0xFF51AFD7ED558CCDULL;
    z ^= z >> 33;
    return z;
}

inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) {
    return mix_seed(mix_seed(a, b), c);
}

}  // namespace semnav
