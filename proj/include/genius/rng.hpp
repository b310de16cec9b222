#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace genius {

// SplitMix64 finalizer; used both for seeding and for deriving stream ids.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derive an independent stream id from a root seed and a path of indices,
// e.g. stream_id(root, {query, timestamp, beam, candidate}). The result only
// depends on the path, never on scheduling order, so parallel callers see the
// same draws as a sequential run.
inline std::uint64_t stream_id(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = mix64(root);
    for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

    static Rng stream(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
        return Rng(stream_id(root, path));
    }

    // Uniform in [0, 1) with 53 bits; independent of the standard library's
    // distribution implementations.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::uint64_t next_u64() { return engine_(); }

    // Index drawn from unnormalized nonnegative weights. Falls back to the last
    // positive entry if rounding pushes the draw past the cumulative total.
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        std::size_t last_positive = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0) continue;
            last_positive = i;
            if (u < weights[i]) return i;
            u -= weights[i];
        }
        return last_positive;
    }

    // Uniform integer in [0, n).
    std::size_t below(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n));
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace genius
