#pragma once

#include <cstdint>

namespace ftn {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t mix64(uint64_t x) {
    uint64_t s = x;
    return splitmix64(s);
}

// xoshiro256**. Self-contained so that campaign replays are reproducible
// across platforms and standard-library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t s = seed;
        for (auto& w : s_) w = splitmix64(s);
    }

    uint64_t next() {
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

    // Uniform-ish draw in [0, bound). Modulo bias is irrelevant for fuzzing
    // decisions but the mapping must stay frozen for replayability.
    uint64_t below(uint64_t bound) { return bound ? next() % bound : 0; }

    uint8_t byte() { return static_cast<uint8_t>(next() & 0xff); }

    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool chance(double p) { return unit() < p; }

    void fill(uint8_t* out, size_t n) {
        for (size_t i = 0; i < n; ++i) out[i] = byte();
    }

    // Derive an independent stream, e.g. one per worker.
    Rng fork(uint64_t salt) {
        uint64_t s = next() ^ mix64(salt);
        return Rng(s);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

} // namespace ftn
