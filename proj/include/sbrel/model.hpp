#pragma once

// Size-biased hierarchical model: pmf transforms, hyperprior moment solver,
// chained negative-binomial likelihood and the conditional kernel of the
// eventual bug sizes. Everything probabilistic is evaluated in log space.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sbrel/error.hpp"
#include "sbrel/ingest.hpp"
#include "sbrel/random.hpp"

namespace sbrel {

// Row-per-phase storage for per-bug quantities: [phase][bug].
template <class T>
using Ragged = std::vector<std::vector<T>>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_choose(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// x * log(y) with the 0 * log(0) = 0 convention.
inline double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }
inline double xlog1my(double x, double y) { return x == 0.0 ? 0.0 : x * std::log1p(-y); }

// ---------------------------------------------------------------------------
// Discrete pmfs and the size-biased transform

struct DiscretePmf {
    std::vector<std::int64_t> support;  // strictly increasing, non-negative
    std::vector<double> mass;

    double mean() const {
        double m = 0.0;
        for (std::size_t k = 0; k < support.size(); ++k) m += static_cast<double>(support[k]) * mass[k];
        return m;
    }

    double at(std::int64_t s) const {
        const auto it = std::lower_bound(support.begin(), support.end(), s);
        if (it == support.end() || *it != s) return 0.0;
        return mass[static_cast<std::size_t>(it - support.begin())];
    }

    void validate(double tol = 1e-12) const {
        if (support.size() != mass.size()) throw DomainError("pmf support and mass differ in length");
        if (support.empty()) throw DomainError("pmf has empty support");
        double total = 0.0;
        for (std::size_t k = 0; k < support.size(); ++k) {
            if (support[k] < 0) throw DomainError("pmf support must be non-negative");
            if (k > 0 && support[k] <= support[k - 1]) throw DomainError("pmf support must be strictly increasing");
            if (!(mass[k] >= 0.0)) throw DomainError("pmf masses must be non-negative");
            total += mass[k];
        }
        if (std::abs(total - 1.0) > tol) throw DomainError("pmf masses must sum to 1");
    }

    // Inverse-CDF draw.
    std::int64_t sample(Rng& rng) const {
        const double u = uniform_open(rng);
        double acc = 0.0;
        for (std::size_t k = 0; k < support.size(); ++k) {
            acc += mass[k];
            if (u <= acc) return support[k];
        }
        // rounding left a sliver above the last cumulative value
        for (std::size_t k = support.size(); k-- > 0;) {
            if (mass[k] > 0.0) return support[k];
        }
        return support.back();
    }
};

// h(s) = s f(s) / E_f[S] on the same support.
inline DiscretePmf size_biased_pmf(const DiscretePmf& f) {
    f.validate(1e-9);
    const double mean = f.mean();
    if (!(mean > 0.0)) throw DegenerateError("size-biased transform of a point mass at 0 is undefined");
    DiscretePmf h{f.support, std::vector<double>(f.mass.size())};
    for (std::size_t k = 0; k < f.support.size(); ++k) {
        h.mass[k] = static_cast<double>(f.support[k]) * f.mass[k] / mean;
    }
    return h;
}

inline DiscretePmf binomial_pmf(std::int64_t trials, double prob) {
    if (trials < 0) throw DomainError("binomial trials must be non-negative");
    if (!(prob >= 0.0 && prob <= 1.0)) throw DomainError("binomial probability must lie in [0, 1]");
    DiscretePmf f;
    for (std::int64_t s = 0; s <= trials; ++s) {
        f.support.push_back(s);
        const double n = static_cast<double>(trials);
        const double k = static_cast<double>(s);
        f.mass.push_back(std::exp(log_choose(n, k) + xlogy(k, prob) + xlog1my(n - k, prob)));
    }
    const double total = std::accumulate(f.mass.begin(), f.mass.end(), 0.0);
    for (auto& m : f.mass) m /= total;
    return f;
}

// ---------------------------------------------------------------------------
// Hyperparameters

struct BetaShape {
    double alpha = 1.0;
    double beta = 1.0;
};

// Beta parameters matching mean mu and variance sigma2.
inline BetaShape solve_beta_hyper(double mu, double sigma2) {
    if (!(mu > 0.0 && mu < 1.0)) throw DomainError("mu must lie in (0, 1)");
    if (!(sigma2 > 0.0)) throw DomainError("sigma2 must be positive");
    const double bound = mu * (1.0 - mu);
    if (!(sigma2 < bound)) {
        throw DomainError("infeasible moments: sigma2 must be below mu(1 - mu) = " + std::to_string(bound));
    }
    const double alpha = mu * (bound / sigma2 - 1.0);
    return {alpha, alpha / mu * (1.0 - mu)};
}

struct Hyperparams {
    // per phase
    std::vector<double> mu;
    std::vector<double> sigma2;
    std::vector<double> alpha_hat;
    std::vector<double> beta_hat;
    // per bug, [phase][bug]
    Ragged<double> a;
    Ragged<double> b;
    Ragged<double> proposal_rate;
    Ragged<std::vector<std::int64_t>> m_weights;  // candidate values of n_ij, drawn with probability ∝ value
    std::int64_t du_bound = 1;                    // support bound k of the DU(1..k) prior on the bug count

    std::size_t phases() const noexcept { return alpha_hat.size(); }

    void validate() const {
        const auto m = alpha_hat.size();
        if (beta_hat.size() != m || mu.size() != m || sigma2.size() != m) throw DomainError("hyperparameter vectors differ in length");
        for (std::size_t j = 0; j < m; ++j) {
            if (!(alpha_hat[j] > 0.0 && beta_hat[j] > 0.0)) throw DomainError("alpha_hat and beta_hat must be positive");
            if (!(sigma2[j] < mu[j] * (1.0 - mu[j]))) throw DomainError("sigma2 must be below mu(1 - mu)");
        }
        if (du_bound < 1) throw DomainError("du_bound must be positive");
        for (const auto& phase : m_weights) {
            for (const auto& row : phase) {
                if (std::any_of(row.begin(), row.end(), [](auto v) { return v < 0; }) ||
                    std::accumulate(row.begin(), row.end(), std::int64_t{0}) <= 0) {
                    throw DomainError("every m_weights row needs a positive total");
                }
            }
        }
        for (const auto* mat : {&a, &b, &proposal_rate}) {
            for (const auto& phase : *mat) {
                for (double v : phase) {
                    if (!(v > 0.0)) throw DomainError("a, b and proposal_rate entries must be positive");
                }
            }
        }
    }
};

// Phase-level hyperpriors: mu_j ~ U(0, 1), sigma2_j | mu_j ~ U(0, mu_j(1 - mu_j)).
inline Hyperparams sample_hyper(std::size_t phases, std::uint64_t seed) {
    if (phases < 1) throw DomainError("need at least one phase");
    Rng rng(derive_seed(seed, 0x6879706572ULL));
    Hyperparams h;
    for (std::size_t j = 0; j < phases; ++j) {
        const double mu = uniform_open(rng);
        const double sigma2 = mu * (1.0 - mu) * uniform_open(rng);
        const auto shape = solve_beta_hyper(mu, sigma2);
        h.mu.push_back(mu);
        h.sigma2.push_back(sigma2);
        h.alpha_hat.push_back(shape.alpha);
        h.beta_hat.push_back(shape.beta);
    }
    return h;
}

// Returns m_k with probability m_k / sum(m).
inline std::int64_t sample_n_trials(std::span<const std::int64_t> row, Rng& rng) {
    if (row.empty()) throw DomainError("m_weights row is empty");
    for (auto v : row) {
        if (v < 0) throw DomainError("m_weights entries must be non-negative");
    }
    if (std::none_of(row.begin(), row.end(), [](auto v) { return v > 0; })) {
        throw DomainError("m_weights row has no positive entry");
    }
    std::discrete_distribution<std::size_t> pick(row.begin(), row.end());
    return row[pick(rng)];
}

// ---------------------------------------------------------------------------
// Likelihood

// r_k = F_k - sum_{i<k} F_i, the negative binomial size of phase k.
inline std::vector<std::int64_t> nb_sizes(std::span<const std::int64_t> totals) {
    std::vector<std::int64_t> r(totals.size());
    std::int64_t prefix = 0;
    for (std::size_t k = 0; k < totals.size(); ++k) {
        r[k] = totals[k] - prefix;
        prefix += totals[k];
    }
    return r;
}

inline bool nb_feasible(std::span<const std::int64_t> totals) {
    const auto r = nb_sizes(totals);
    return std::all_of(r.begin(), r.end(), [](auto v) { return v > 0; });
}

// log C(N + r - 1, N) + N log p + r log(1 - p)
inline double log_nb_pmf(std::int64_t count, std::int64_t size, double p) {
    const double n = static_cast<double>(count);
    const double r = static_cast<double>(size);
    return std::lgamma(n + r) - std::lgamma(n + 1.0) - std::lgamma(r) + xlogy(n, p) + r * std::log1p(-p);
}

// Chained negative-binomial likelihood of the cumulative run counts.
inline double log_likelihood(std::span<const std::int64_t> totals, std::span<const std::int64_t> runs,
                             std::span<const double> p) {
    if (totals.size() != runs.size() || totals.size() != p.size()) {
        throw DomainError("log_likelihood: F, N and p must have equal length");
    }
    const auto r = nb_sizes(totals);
    double ll = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) {
        if (r[k] <= 0) {
            throw InfeasibleError(k + 1, "negative binomial size F_k - sum F_i = " + std::to_string(r[k]) +
                                             " is not positive");
        }
        if (!(p[k] > 0.0 && p[k] < 1.0)) throw DomainError("p must lie in (0, 1)");
        if (runs[k] < 0) throw DomainError("run counts must be non-negative");
        ll += log_nb_pmf(runs[k], r[k], p[k]);
    }
    return ll;
}

// ---------------------------------------------------------------------------
// Chain state and the conditional kernel of S

struct ChainState {
    Ragged<std::int64_t> S;        // eventual sizes
    std::vector<double> p;         // per phase
    Ragged<double> t;              // per bug
    Ragged<std::int64_t> n_trials; // per bug, fixed within a chain
    std::vector<std::int64_t> F;   // row sums of S

    void recompute_totals() {
        F.assign(S.size(), 0);
        for (std::size_t j = 0; j < S.size(); ++j) F[j] = std::accumulate(S[j].begin(), S[j].end(), std::int64_t{0});
    }
};

namespace detail {

inline double nb_kernel_part(std::span<const std::int64_t> totals, std::span<const PhaseSummary> data,
                             std::span<const double> p, std::size_t from_phase) {
    std::int64_t prefix = 0;
    for (std::size_t k = 0; k < from_phase; ++k) prefix += totals[k];
    double acc = 0.0;
    for (std::size_t k = from_phase; k < totals.size(); ++k) {
        const std::int64_t r = totals[k] - prefix;
        if (r <= 0) return kNegInf;
        const double n = static_cast<double>(data[k].runs_cumulative);
        const double rd = static_cast<double>(r);
        acc += std::lgamma(n + rd) - std::lgamma(n + 1.0) - std::lgamma(rd) + rd * std::log1p(-p[k]);
        prefix += totals[k];
    }
    return acc;
}

// log[ s C(n, s) t^s (1 - t)^(n - s) ] restricted to s >= max(observed, 1).
inline double bug_kernel_term(std::int64_t s, std::int64_t observed, std::int64_t n, double t) {
    if (s > n) throw DomainError("eventual size S_ij exceeds n_ij");
    if (s <= 0 || s < observed) return kNegInf;
    const double sd = static_cast<double>(s);
    const double nd = static_cast<double>(n);
    return std::log(sd) + log_choose(nd, sd) + xlogy(sd, t) + xlog1my(nd - sd, t);
}

}  // namespace detail

// A target kernel for the S updates. `log_ratio` returns the log of the kernel
// at the state with S_ij = proposed over the kernel at the current state; -inf
// marks zero posterior mass.
template <class K>
concept SizeKernel = requires(const K& k, const ChainState& s, std::span<const PhaseSummary> d, const Hyperparams& h,
                              std::size_t j, std::size_t i, std::int64_t v) {
    { k.log_kernel(s, d, h) } -> std::convertible_to<double>;
    { k.log_ratio(s, d, h, j, i, v) } -> std::convertible_to<double>;
};

// Binomial size distribution with size bias; the only target implemented. Other
// target distributions slot in as further SizeKernel types.
struct SizeBiasedBinomialKernel {
    double log_kernel(const ChainState& state, std::span<const PhaseSummary> data, const Hyperparams&) const {
        // evaluate the bug terms first so S > n is reported even when r_k <= 0
        double bugs = 0.0;
        for (std::size_t j = 0; j < state.S.size(); ++j) {
            for (std::size_t i = 0; i < state.S[j].size(); ++i) {
                bugs += detail::bug_kernel_term(state.S[j][i], data[j].observed_sizes[i], state.n_trials[j][i],
                                                state.t[j][i]);
            }
        }
        std::vector<std::int64_t> totals(state.S.size());
        for (std::size_t j = 0; j < state.S.size(); ++j)
            totals[j] = std::accumulate(state.S[j].begin(), state.S[j].end(), std::int64_t{0});
        const double nb = detail::nb_kernel_part(totals, data, state.p, 0);
        if (nb == kNegInf || bugs == kNegInf) return kNegInf;
        return nb + bugs;
    }

    double log_ratio(const ChainState& state, std::span<const PhaseSummary> data, const Hyperparams&, std::size_t j,
                     std::size_t i, std::int64_t proposed) const {
        const std::int64_t current = state.S[j][i];
        const std::int64_t n = state.n_trials[j][i];
        const std::int64_t observed = data[j].observed_sizes[i];
        if (proposed > n || proposed < std::max<std::int64_t>(observed, 1)) return kNegInf;
        if (proposed == current) return 0.0;

        std::vector<std::int64_t> totals(state.F);
        const double before = detail::nb_kernel_part(totals, data, state.p, j);
        totals[j] += proposed - current;
        const double after = detail::nb_kernel_part(totals, data, state.p, j);
        if (after == kNegInf) return kNegInf;

        const double t = state.t[j][i];
        return (after - before) + detail::bug_kernel_term(proposed, observed, n, t) -
               detail::bug_kernel_term(current, observed, n, t);
    }
};

static_assert(SizeKernel<SizeBiasedBinomialKernel>);

// Log of the unnormalized conditional posterior kernel of the whole S matrix.
inline double log_posterior_S_kernel(const ChainState& state, std::span<const PhaseSummary> data,
                                     const Hyperparams& hyper) {
    return SizeBiasedBinomialKernel{}.log_kernel(state, data, hyper);
}

// ---------------------------------------------------------------------------
// Building Hyperparams for a data set

// A per-bug quantity given either as one value for every bug or as a full [phase][bug] matrix.
template <class T>
struct Broadcast {
    std::optional<T> scalar;
    std::optional<Ragged<T>> matrix;

    bool is_set() const noexcept { return scalar.has_value() || matrix.has_value(); }

    Ragged<T> expand(std::span<const PhaseSummary> data, const char* name) const {
        Ragged<T> out(data.size());
        for (std::size_t j = 0; j < data.size(); ++j) {
            const auto bugs = data[j].observed_sizes.size();
            if (matrix) {
                if (matrix->size() != data.size() || (*matrix)[j].size() != bugs) {
                    throw ConfigurationError(std::string(name) + " matrix shape does not match the data");
                }
                out[j] = (*matrix)[j];
            } else {
                out[j].assign(bugs, *scalar);
            }
        }
        return out;
    }
};

struct HyperConfig {
    std::optional<std::int64_t> du_bound;
    Broadcast<double> proposal_rate;               // default max(s_ij, 1)
    Broadcast<double> a;                           // default 1
    Broadcast<double> b;                           // default 1
    Broadcast<std::vector<std::int64_t>> m_weights;  // default {s', 2s', 3s', 4s'}, s' = max(s_ij, 1)
    std::optional<std::vector<double>> mu;         // overrides the sampled mu_j (one value broadcasts)
    std::optional<std::vector<double>> sigma2;     // overrides the sampled sigma2_j
    std::uint64_t hyper_seed = 0;
};

inline Hyperparams build_hyperparams(std::span<const PhaseSummary> data, const HyperConfig& cfg) {
    const auto m = data.size();
    if (m == 0) throw ValidationError("no phases to fit");
    Hyperparams h = sample_hyper(m, cfg.hyper_seed);

    if (cfg.mu || cfg.sigma2) {
        const auto pick = [m](const std::optional<std::vector<double>>& v, const std::vector<double>& fallback,
                              const char* name) {
            if (!v) return fallback;
            if (v->size() == 1) return std::vector<double>(m, v->front());
            if (v->size() != m) throw ConfigurationError(std::string(name) + " must have one entry per phase");
            return *v;
        };
        h.mu = pick(cfg.mu, h.mu, "mu");
        if (cfg.sigma2) {
            h.sigma2 = pick(cfg.sigma2, h.sigma2, "sigma2");
        } else {
            // keep the sampled relative position inside (0, mu(1 - mu))
            auto fresh = sample_hyper(m, cfg.hyper_seed);
            for (std::size_t j = 0; j < m; ++j) {
                const double frac = fresh.sigma2[j] / (fresh.mu[j] * (1.0 - fresh.mu[j]));
                h.sigma2[j] = frac * h.mu[j] * (1.0 - h.mu[j]);
            }
        }
        for (std::size_t j = 0; j < m; ++j) {
            const auto shape = solve_beta_hyper(h.mu[j], h.sigma2[j]);
            h.alpha_hat[j] = shape.alpha;
            h.beta_hat[j] = shape.beta;
        }
    }

    const auto defaulted = [&](const Broadcast<double>& v, const char* name, auto fallback) {
        if (v.is_set()) return v.expand(data, name);
        Ragged<double> out(m);
        for (std::size_t j = 0; j < m; ++j) {
            for (auto s : data[j].observed_sizes) out[j].push_back(fallback(s));
        }
        return out;
    };
    h.a = defaulted(cfg.a, "a", [](std::int64_t) { return 1.0; });
    h.b = defaulted(cfg.b, "b", [](std::int64_t) { return 1.0; });
    h.proposal_rate = defaulted(cfg.proposal_rate, "proposal_rate",
                                [](std::int64_t s) { return static_cast<double>(std::max<std::int64_t>(s, 1)); });

    if (cfg.m_weights.is_set()) {
        h.m_weights = cfg.m_weights.expand(data, "m_weights");
    } else {
        h.m_weights.resize(m);
        for (std::size_t j = 0; j < m; ++j) {
            for (auto s : data[j].observed_sizes) {
                const auto base = std::max<std::int64_t>(s, 1);
                h.m_weights[j].push_back({base, 2 * base, 3 * base, 4 * base});
            }
        }
    }

    const auto distinct = static_cast<std::int64_t>(distinct_defect_ids(data));
    h.du_bound = cfg.du_bound.value_or(std::max<std::int64_t>(2 * distinct, 1));
    if (distinct > h.du_bound) {
        throw ConfigurationError("the data hold " + std::to_string(distinct) +
                                 " distinct bugs, outside the support of the DU(1.." + std::to_string(h.du_bound) + ") prior");
    }
    h.validate();
    return h;
}

}  // namespace sbrel
