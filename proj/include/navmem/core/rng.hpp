#pragma once

#include <cmath>
#include <cstdint>

namespace navmem {

// Deterministic PRNG (splitmix64 core). std:: distributions are
// implementation-defined, so all sampling goes through this type to keep
// runs bit-identical across compilers and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // {0, ..., n-1}; modulo bias is irrelevant at the n used here
    int uniform_int(int n) { return n <= 1 ? 0 : static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

    // Box-Muller, two fresh uniforms per sample (no cached spare)
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // Independent substream; safe for per-episode / per-worker derivation.
    Rng fork(std::uint64_t stream) const {
        Rng r(state_ ^ (0xD1B54A32D192ED03ULL + stream * 0x2545F4914F6CDD1DULL));
        r.next_u64();
        return r;
    }

private:
    std::uint64_t state_;
};

}  // namespace navmem
