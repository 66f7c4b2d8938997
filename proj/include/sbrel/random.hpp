#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include "sbrel/error.hpp"

namespace sbrel {

// One generator per chain / trial. Never shared across threads.
using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent sub-seeds from one user seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

// Uniform draw on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
    for (;;) {
        const double u = std::generate_canonical<double, 53>(rng);
        if (u > 0.0 && u < 1.0) return u;
    }
}

// log of a Gamma(shape, 1) variate. Stays finite for tiny shapes, where the
// variate itself underflows: G(a) = G(a + 1) * U^(1/a).
inline double log_gamma_variate(double shape, Rng& rng) {
    if (!(shape > 0.0)) throw DomainError("gamma shape must be positive");
    if (shape >= 1.0) {
        std::gamma_distribution<double> g(shape, 1.0);
        double x = g(rng);
        while (!(x > 0.0)) x = g(rng);
        return std::log(x);
    }
    std::gamma_distribution<double> g(shape + 1.0, 1.0);
    double x = g(rng);
    while (!(x > 0.0)) x = g(rng);
    return std::log(x) + std::log(uniform_open(rng)) / shape;
}

// Beta(a, b) via the ratio of gamma variates, computed in log space.
inline double beta_variate(double a, double b, Rng& rng) {
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("beta parameters must be positive");
    const double lx = log_gamma_variate(a, rng);
    const double ly = log_gamma_variate(b, rng);
    // x / (x + y) = 1 / (1 + exp(ly - lx))
    const double d = ly - lx;
    if (d > 0) {
        const double e = std::exp(-d);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(d));
}

inline std::int64_t poisson_variate(double rate, Rng& rng) {
    if (!(rate > 0.0)) throw DomainError("poisson rate must be positive");
    std::poisson_distribution<std::int64_t> d(rate);
    return d(rng);
}

inline std::int64_t binomial_variate(std::int64_t trials, double prob, Rng& rng) {
    if (trials <= 0 || prob <= 0.0) return 0;
    if (prob >= 1.0) return trials;
    std::binomial_distribution<std::int64_t> d(trials, prob);
    return d(rng);
}

// Draws N with pmf C(N + r - 1, N) p^N (1 - p)^r.
inline std::int64_t negative_binomial_variate(std::int64_t size, double p, Rng& rng) {
    if (size <= 0) throw DomainError("negative binomial size must be positive");
    if (!(p > 0.0 && p < 1.0)) throw DomainError("negative binomial probability must lie in (0, 1)");
    // libstdc++ counts failures before `size` successes with success probability 1 - p.
    std::negative_binomial_distribution<std::int64_t> d(size, 1.0 - p);
    return d(rng);
}

}  // namespace sbrel
