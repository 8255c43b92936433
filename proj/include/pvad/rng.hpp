#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pvad {

inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Seeded RNG with hand-rolled distributions. std::mt19937_64's output
// sequence is pinned by the standard; std::*_distribution is not, so the
// uniform/normal helpers below are implemented directly to keep generated
// corpora identical across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    // Derives an independent stream from (master, a, b). Used to give every
    // clip/speaker/component its own generator so results do not depend on
    // generation order.
    static Rng derive(uint64_t master, uint64_t a, uint64_t b = 0) {
        uint64_t s = master;
        uint64_t h = splitmix64(s);
        s ^= a * 0x9e3779b97f4a7c15ull;
        h ^= splitmix64(s);
        s ^= b * 0xc2b2ae3d27d4eb4full;
        h ^= splitmix64(s);
        return Rng(h);
    }

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] via rejection-free 64-bit modulo reduction;
    // bias is negligible for the small ranges used here.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo + 1);
        return lo + static_cast<int64_t>(eng_() % span);
    }

    // Standard normal via Box-Muller; one value per call.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 eng_;
};

} // namespace pvad
