#ifndef SECRELAY_DETAIL_RNG_HPP
#define SECRELAY_DETAIL_RNG_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

// Deterministic sampling helpers. std::*_distribution is implementation
// defined, so everything here maps raw mt19937_64 output to doubles by hand
// and stays bit-reproducible for a given seed.

namespace secrelay::detail {

// Uniform in the open interval (0,1).
inline double uniform_open(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Uniform in [lo, hi).
inline double uniform_in(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_open(rng);
}

// Circularly symmetric complex Gaussian with zero mean and unit variance
// (E|h|^2 = 1): Rayleigh magnitude, uniform phase.
inline std::complex<double> complex_gaussian(std::mt19937_64& rng) {
    const double u = uniform_open(rng);
    const double phase = 2.0 * std::numbers::pi * uniform_open(rng);
    const double mag = std::sqrt(-std::log(u));
    return {mag * std::cos(phase), mag * std::sin(phase)};
}

// Exp(1) variate, used for Dirichlet-style feasible starts.
inline double exponential(std::mt19937_64& rng) {
    return -std::log(uniform_open(rng));
}

// Stable seed derivation so that start k of a multi-start run does not
// depend on how many starts were requested.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace secrelay::detail

#endif
