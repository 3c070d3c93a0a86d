#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

#include "trmlab/errors.hpp"

namespace trmlab {

// Counter-based splitmix64 stream, fixed forever so experiment outputs stay
// byte-stable. State is the pair (seed, counter); the n-th draw (1-based) is
//
//   z = seed + n * 0x9E3779B97F4A7C15
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   out = z ^ (z >> 31)
//
// which reproduces the reference splitmix64 output sequence for `seed`.
struct RngState {
    std::uint64_t seed = 0;
    std::uint64_t counter = 0;
};

inline std::uint64_t next_u64(RngState& rng) {
    std::uint64_t z = rng.seed + (++rng.counter) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Uniform in [0, 1), 53-bit resolution.
inline double next_uniform(RngState& rng) {
    return static_cast<double>(next_u64(rng) >> 11) * 0x1.0p-53;
}

// Uniform in (0, 1]; safe as a log argument.
inline double next_uniform_pos(RngState& rng) {
    return static_cast<double>((next_u64(rng) >> 11) + 1) * 0x1.0p-53;
}

// Uniform integer in [0, bound) by scaling; bound must be <= 2^53 so the
// mapping stays exact. Fine for index shuffling at this scale.
inline std::size_t next_index(RngState& rng, std::size_t bound) {
    if (bound == 0) throw ContractViolation("next_index: bound must be positive");
    return static_cast<std::size_t>(next_uniform(rng) * static_cast<double>(bound));
}

// Standard normal pairs via Box-Muller on consecutive uniforms. Two draws per
// pair; for odd n the second half of the last pair is discarded.
inline void fill_gaussian(RngState& rng, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; i += 2) {
        const double u1 = next_uniform_pos(rng);
        const double u2 = next_uniform(rng);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        out[i] = r * std::cos(a);
        if (i + 1 < n) out[i + 1] = r * std::sin(a);
    }
}

inline std::vector<double> gaussian_vector(RngState& rng, std::size_t n) {
    if (n == 0) throw ContractViolation("gaussian_vector: n must be positive");
    std::vector<double> out(n);
    fill_gaussian(rng, out.data(), n);
    return out;
}

// Well-mixed sub-seed for (base, salt); used to fan one experiment seed out
// into independent module-local streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    RngState r{base, salt};
    return next_u64(r);
}

// In-place Fisher-Yates shuffle driven by the stream above.
template <typename T>
void shuffle(RngState& rng, std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = next_index(rng, i);
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace trmlab
