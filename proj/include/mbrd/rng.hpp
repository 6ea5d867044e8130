#pragma once

#include <cstdint>
#include <string_view>

namespace mbrd {

namespace detail {

// splitmix64 finalizer (Steele et al.); bijective on 64-bit words.
inline uint64_t mix64(uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline uint64_t rotl64(uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// Seedable, splittable generator (xoshiro256** core, splitmix64 seeding).
//
// Substreams are derived from the seed material, not from the evolving
// state: substream(a, b) yields the same stream no matter how many draws
// were taken from the parent. This is what makes pool generation
// order-independent: sample i always uses rng.substream(i), so parallel
// and serial runs produce identical output.
//
// std::uniform_*_distribution is implementation-defined, so all draws go
// through next_u64/next_double only.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed) {
        uint64_t x = seed;
        for (auto& word : state_) {
            x = detail::mix64(x);
            word = x;
        }
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) {
            state_[0] = 1;  // xoshiro must not start all-zero
        }
    }

    uint64_t next_u64() {
        const uint64_t result = detail::rotl64(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl64(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, bound); bound > 0. Rejection-free modulo is
    // fine here: bound is tiny relative to 2^64 in every use site.
    uint64_t next_below(uint64_t bound) {
        return next_u64() % bound;
    }

    // Child stream independent of this stream's position.
    Rng substream(uint64_t a, uint64_t b = 0) const {
        uint64_t s = detail::mix64(seed_);
        s = detail::mix64(s + a);
        s = detail::mix64(s + b);
        return Rng(s);
    }

    Rng substream(std::string_view name) const {
        // FNV-1a over the name, folded into the seed chain.
        uint64_t h = 0xCBF29CE484222325ull;
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001B3ull;
        }
        return substream(h, 0x5eed);
    }

    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
    uint64_t state_[4];
};

}  // namespace mbrd
