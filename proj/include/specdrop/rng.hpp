#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace specdrop {

// splitmix64, used to whiten seeds and derive independent substreams.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64_str(const char* s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (; *s; ++s) {
        h ^= static_cast<unsigned char>(*s);
        h *= 0x100000001b3ull;
    }
    return h;
}

// Deterministic RNG stream. Distributions are implemented explicitly so the
// generated sequences are fully specified by this code, not by the standard
// library implementation.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(splitmix64(seed)) {}

    // Derive an independent stream, e.g. one per dataset sample or per
    // dropout site.
    static Rng substream(uint64_t seed, uint64_t index) {
        return Rng(splitmix64(seed) ^ splitmix64(index * 0x9e3779b97f4a7c15ull + 1));
    }

    uint64_t next_u64() { return gen_(); }

    // uniform on [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t uniform_int(uint64_t n) {
        // modulo bias is negligible for n << 2^64 but reject anyway
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // standard normal via Box-Muller (no cached spare, keeps the stream
    // position independent of call history)
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

}  // namespace specdrop
