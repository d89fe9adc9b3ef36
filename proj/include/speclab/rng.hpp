#pragma once

// Deterministic hashing and random streams. std:: distributions are
// implementation-defined, so everything here is hand-rolled to keep runs
// byte-reproducible across platforms and compilers.

#include <cstdint>
#include <span>

namespace speclab {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Order-sensitive hash of a token window.
inline std::uint64_t hash_tokens(std::uint64_t seed, std::span<const std::int32_t> toks) {
    std::uint64_t h = splitmix64(seed ^ 0x7ED558CCD1AE9F6BULL);
    for (std::int32_t t : toks) {
        h = splitmix64(h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t)) + 0x4CF5AD432745937FULL));
    }
    return h;
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (b + 0x9E3779B97F4A7C15ULL));
}

inline double unit_from_bits(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Counter-based splitmix stream; state advances by a fixed odd increment.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_unit() { return unit_from_bits(next_u64()); }

    std::uint64_t state() const { return state_; }

  private:
    std::uint64_t state_;
};

}  // namespace speclab
