#pragma once

#include <cstdint>
#include <random>

namespace bctseg {

// Thin wrapper over mt19937_64 with bounded draws defined here rather than by
// the standard library distributions, whose output is implementation-defined.
// Two builds on different standard libraries produce the same stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t uniform_index(std::uint64_t bound) {
        // Rejection on the top partial bucket keeps the draw exactly uniform.
        const std::uint64_t limit = std::uint64_t(0) - (std::uint64_t(0) - bound) % bound;
        for (;;) {
            const std::uint64_t x = engine_();
            if (limit == 0 || x < limit) return x % bound;
        }
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

}  // namespace bctseg
