#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace rod {

/// Deterministic splittable random source. One root generator is seeded from
/// the CLI seed; every consumer pulls a named substream so the draw order in
/// one module cannot perturb another. Substreams derive from the stored seed,
/// not from engine state, so deriving is independent of how many values the
/// parent has drawn. Distribution transforms work on raw 64-bit outputs so
/// results do not depend on the standard library's distribution code.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

    /// Derive an independent, reproducible substream from a name.
    Rng substream(std::string_view name) const {
        uint64_t h = 1469598103934665603ull;  // FNV-1a
        for (char c : name) {
            h ^= static_cast<uint8_t>(c);
            h *= 1099511628211ull;
        }
        return Rng(mix(seed_ ^ h));
    }
    Rng substream(std::string_view name, long index) const {
        return substream(std::string(name) + "/" + std::to_string(index));
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n), unbiased via rejection.
    uint64_t uniform_int(uint64_t n) {
        if (n == 0) return 0;
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Marsaglia's polar method (no trig, deterministic).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    bool bernoulli(double p) { return uniform() < p; }

    uint64_t next_u64() { return engine_(); }

private:
    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace rod
