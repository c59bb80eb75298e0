// Deterministic random streams. Every stochastic component takes an explicit
// Rng; independent streams are derived from (master seed, purpose, index) so
// results never depend on thread scheduling.
#pragma once

#include <cstdint>
#include <string_view>

namespace qdgen {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stable across platforms: xoshiro256** seeded via splitmix64.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform index in [0, n). n must be > 0.
    size_t uniform_index(size_t n) {
        return static_cast<size_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

// FNV-1a over the purpose tag mixed with the index; gives each (purpose,
// index) pair its own stream regardless of evaluation order.
inline uint64_t derive_seed(uint64_t master, std::string_view purpose, uint64_t index = 0) {
    uint64_t h = 1469598103934665603ULL ^ master;
    for (char c : purpose) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    h ^= index;
    uint64_t sm = h;
    return splitmix64(sm);
}

}  // namespace qdgen
