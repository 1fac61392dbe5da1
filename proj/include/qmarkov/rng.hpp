// Reproducible random substreams.
//
// Stream (seed, index) is a std::mt19937_64 seeded with
// splitmix64(seed ^ splitmix64(index + 1)). Uniform variates take the top 53
// bits of one 64-bit draw, so a record is fixed by the generator alone and does
// not depend on the standard library's distribution implementations.

#pragma once

#include <cstdint>
#include <random>

namespace qmarkov {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t index)
        : engine_(splitmix64(seed ^ splitmix64(index + 1))) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace qmarkov
