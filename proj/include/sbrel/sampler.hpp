#pragma once

// Metropolis-Hastings within Gibbs for the size-biased model. Each sweep runs
// an MH step for every S_ij (Poisson independence proposal), then conjugate
// Beta draws for every t_ij and every p_j.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sbrel/diagnostics.hpp"
#include "sbrel/error.hpp"
#include "sbrel/ingest.hpp"
#include "sbrel/model.hpp"
#include "sbrel/random.hpp"

namespace sbrel {

struct SamplerConfig {
    std::int64_t chains = 4;
    std::int64_t iterations = 4000;
    std::int64_t burn_in = 1000;
    std::int64_t thin = 1;
    std::uint64_t seed = 0;
    double epsilon_floor = 1e-9;
    unsigned threads = 0;               // 0 = hardware concurrency
    std::int64_t max_init_attempts = 100;
    bool keep_state_draws = false;      // retain full S matrices, not just F

    std::int64_t retained_per_chain() const {
        return (iterations - burn_in + thin - 1) / thin;
    }

    void validate() const {
        if (chains < 1) throw ValidationError("chains must be positive");
        if (iterations < 1) throw ValidationError("iterations must be positive");
        if (burn_in < 0 || burn_in >= iterations) throw ValidationError("burn_in must lie in [0, iterations)");
        if (thin < 1) throw ValidationError("thin must be at least 1");
        if (!(epsilon_floor > 0.0 && epsilon_floor < 0.5)) throw ValidationError("epsilon_floor must lie in (0, 0.5)");
        if (max_init_attempts < 1) throw ValidationError("max_init_attempts must be positive");
    }
};

struct PosteriorSummary {
    std::vector<std::vector<std::int64_t>> F_draws;  // [phase][draw], chains concatenated in order
    std::vector<std::vector<std::vector<std::int64_t>>> chain_F_draws;  // [chain][phase][draw]
    std::vector<Ragged<std::int64_t>> S_draws;  // [draw] (chain-major), only with keep_state_draws
    std::vector<double> F_mean;
    std::vector<double> F_median;
    std::vector<std::pair<double, double>> F_ci;  // 2.5% and 97.5% quantiles
    Ragged<double> acceptance_rate;               // [phase][bug]
    std::vector<std::optional<ConvergenceDiagnostic>> diagnostics;  // per phase; empty with a single chain
    std::vector<std::string> warnings;

    double mean_acceptance() const {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& row : acceptance_rate) {
            for (double a : row) {
                sum += a;
                ++count;
            }
        }
        return count == 0 ? 0.0 : sum / static_cast<double>(count);
    }
};

// Linear interpolation between order statistics (type 7).
inline double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw InsufficientDataError("quantile of an empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// ---------------------------------------------------------------------------
// Single-site updates

inline BetaShape p_conditional(const ChainState& state, const Hyperparams& hyper, std::span<const PhaseSummary> data,
                               std::size_t j) {
    const auto r = nb_sizes(state.F);
    if (r[j] <= 0) throw InfeasibleError(j + 1, "p update needs a positive negative binomial size");
    const double a = static_cast<double>(data[j].runs_cumulative) + hyper.alpha_hat[j];
    const double b = static_cast<double>(r[j]) + hyper.beta_hat[j];
    if (!(a > 0.0 && b > 0.0)) throw DomainError("non-positive Beta parameters in the p update");
    return {a, b};
}

inline BetaShape t_conditional(const ChainState& state, const Hyperparams& hyper, std::size_t j, std::size_t i) {
    const auto s = state.S[j][i];
    const auto n = state.n_trials[j][i];
    if (s < 0 || s > n) throw DomainError("t update needs 0 <= S_ij <= n_ij");
    return {static_cast<double>(s) + hyper.a[j][i], static_cast<double>(n - s) + hyper.b[j][i]};
}

inline double clamp_open(double x, double floor) { return std::clamp(x, floor, 1.0 - floor); }

inline double gibbs_update_p(ChainState& state, const Hyperparams& hyper, std::span<const PhaseSummary> data,
                             std::size_t j, Rng& rng, double epsilon_floor = 1e-9) {
    const auto shape = p_conditional(state, hyper, data, j);
    state.p[j] = clamp_open(beta_variate(shape.alpha, shape.beta, rng), epsilon_floor);
    return state.p[j];
}

inline double gibbs_update_t(ChainState& state, const Hyperparams& hyper, std::size_t j, std::size_t i, Rng& rng,
                             double epsilon_floor = 1e-9) {
    const auto shape = t_conditional(state, hyper, j, i);
    state.t[j][i] = clamp_open(beta_variate(shape.alpha, shape.beta, rng), epsilon_floor);
    return state.t[j][i];
}

struct MhStep {
    std::int64_t value = 0;
    bool accepted = false;
};

// log of the proposal correction q(S | S') / q(S' | S) for the Poisson(lambda) independence proposal.
inline double poisson_proposal_correction(std::int64_t current, std::int64_t proposed, double rate) {
    const double lr = std::log(rate);
    return (static_cast<double>(current) * lr - std::lgamma(static_cast<double>(current) + 1.0)) -
           (static_cast<double>(proposed) * lr - std::lgamma(static_cast<double>(proposed) + 1.0));
}

template <SizeKernel Kernel = SizeBiasedBinomialKernel>
MhStep mh_update_S(ChainState& state, std::span<const PhaseSummary> data, const Hyperparams& hyper, std::size_t j,
                   std::size_t i, Rng& rng, const Kernel& kernel = {}) {
    const double rate = hyper.proposal_rate[j][i];
    const std::int64_t current = state.S[j][i];
    const std::int64_t proposed = poisson_variate(rate, rng);
    const double u = uniform_open(rng);

    if (proposed == current) return {current, true};
    const double log_target = kernel.log_ratio(state, data, hyper, j, i, proposed);
    if (log_target == kNegInf) return {current, false};

    const double log_alpha = log_target + poisson_proposal_correction(current, proposed, rate);
    if (log_alpha >= 0.0 || std::log(u) < log_alpha) {
        state.S[j][i] = proposed;
        state.F[j] += proposed - current;
        return {proposed, true};
    }
    return {current, false};
}

// ---------------------------------------------------------------------------
// Chains

// Draws n_ij once, then starts from S = max(s, 1) and raises later phases until
// every r_k is positive. Redraws n_ij when that fails.
inline ChainState initialize_chain(std::span<const PhaseSummary> data, const Hyperparams& hyper, Rng& rng,
                                   const SamplerConfig& config) {
    const auto m = data.size();
    std::string last_failure;
    for (std::int64_t attempt = 0; attempt < config.max_init_attempts; ++attempt) {
        ChainState st;
        st.S.resize(m);
        st.t.resize(m);
        st.n_trials.resize(m);
        st.p.resize(m);
        bool ok = true;
        for (std::size_t j = 0; j < m && ok; ++j) {
            const auto& sizes = data[j].observed_sizes;
            for (std::size_t i = 0; i < sizes.size(); ++i) {
                const auto floor = std::max<std::int64_t>(sizes[i], 1);
                std::vector<std::int64_t> row;
                for (auto v : hyper.m_weights[j][i]) {
                    if (v >= floor) row.push_back(v);
                }
                if (row.empty()) {
                    throw InitializationError("phase " + std::to_string(j + 1) + ", bug " + std::to_string(i + 1) +
                                              ": no candidate n_ij reaches the observed size " +
                                              std::to_string(sizes[i]));
                }
                st.n_trials[j].push_back(sample_n_trials(row, rng));
                st.S[j].push_back(floor);
                const double a = hyper.a[j][i];
                const double b = hyper.b[j][i];
                st.t[j].push_back(clamp_open(a / (a + b), config.epsilon_floor));
            }
            st.p[j] = clamp_open(hyper.alpha_hat[j] / (hyper.alpha_hat[j] + hyper.beta_hat[j]), config.epsilon_floor);
        }
        st.recompute_totals();

        std::int64_t prefix = 0;
        for (std::size_t j = 0; j < m && ok; ++j) {
            for (std::size_t i = 0; i < st.S[j].size() && st.F[j] <= prefix; ++i) {
                const auto raise = std::min(prefix + 1 - st.F[j], st.n_trials[j][i] - st.S[j][i]);
                st.S[j][i] += raise;
                st.F[j] += raise;
            }
            if (st.F[j] <= prefix) {
                ok = false;
                last_failure = "phase " + std::to_string(j + 1) + " cannot exceed the earlier phase totals (" +
                               std::to_string(prefix) + ") within its n_ij bounds";
            }
            prefix += st.F[j];
        }
        if (ok) return st;
    }
    throw InitializationError("no feasible initial state after " + std::to_string(config.max_init_attempts) +
                              " attempts: " + last_failure);
}

struct ChainOutput {
    std::vector<std::vector<std::int64_t>> F;  // [phase][draw]
    std::vector<Ragged<std::int64_t>> S;       // [draw]
    Ragged<std::int64_t> accepted;             // [phase][bug]
    std::int64_t sweeps = 0;
};

template <SizeKernel Kernel = SizeBiasedBinomialKernel>
ChainOutput run_single_chain(std::span<const PhaseSummary> data, const Hyperparams& hyper, const SamplerConfig& config,
                             std::uint64_t chain_seed, const Kernel& kernel = {}) {
    Rng rng(chain_seed);
    ChainState st = initialize_chain(data, hyper, rng, config);
    const auto m = data.size();

    ChainOutput out;
    out.F.resize(m);
    out.accepted.resize(m);
    for (std::size_t j = 0; j < m; ++j) out.accepted[j].assign(st.S[j].size(), 0);
    const auto keep = static_cast<std::size_t>(config.retained_per_chain());
    for (auto& f : out.F) f.reserve(keep);

    for (std::int64_t it = 0; it < config.iterations; ++it) {
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t i = 0; i < st.S[j].size(); ++i) {
                if (mh_update_S(st, data, hyper, j, i, rng, kernel).accepted) ++out.accepted[j][i];
            }
        }
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t i = 0; i < st.S[j].size(); ++i) gibbs_update_t(st, hyper, j, i, rng, config.epsilon_floor);
        }
        for (std::size_t j = 0; j < m; ++j) gibbs_update_p(st, hyper, data, j, rng, config.epsilon_floor);
        ++out.sweeps;

        if (it >= config.burn_in && (it - config.burn_in) % config.thin == 0) {
            for (std::size_t j = 0; j < m; ++j) out.F[j].push_back(st.F[j]);
            if (config.keep_state_draws) out.S.push_back(st.S);
        }
    }
    return out;
}

template <SizeKernel Kernel = SizeBiasedBinomialKernel>
PosteriorSummary run_chain(std::span<const PhaseSummary> data, const Hyperparams& hyper, const SamplerConfig& config,
                           const Kernel& kernel = {}) {
    config.validate();
    validate_phases(data);
    hyper.validate();
    if (hyper.phases() != data.size()) throw ConfigurationError("hyperparameters and data disagree on phase count");

    const auto chains = static_cast<std::size_t>(config.chains);
    std::vector<ChainOutput> outputs(chains);
    std::vector<std::exception_ptr> errors(chains);
    const auto work = [&](std::size_t c) {
        try {
            outputs[c] = run_single_chain(data, hyper, config, derive_seed(config.seed, c + 1), kernel);
        } catch (...) {
            errors[c] = std::current_exception();
        }
    };

    unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, chains));
    if (threads <= 1) {
        for (std::size_t c = 0; c < chains; ++c) work(c);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t c = w; c < chains; c += threads) work(c);
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    const auto m = data.size();
    PosteriorSummary sum;
    sum.F_draws.resize(m);
    sum.acceptance_rate.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        sum.acceptance_rate[j].assign(data[j].observed_sizes.size(), 0.0);
    }
    std::int64_t total_sweeps = 0;
    for (auto& out : outputs) {
        for (std::size_t j = 0; j < m; ++j) {
            sum.F_draws[j].insert(sum.F_draws[j].end(), out.F[j].begin(), out.F[j].end());
            for (std::size_t i = 0; i < out.accepted[j].size(); ++i) {
                sum.acceptance_rate[j][i] += static_cast<double>(out.accepted[j][i]);
            }
        }
        total_sweeps += out.sweeps;
        for (auto& s : out.S) sum.S_draws.push_back(std::move(s));
        sum.chain_F_draws.push_back(std::move(out.F));
    }
    for (auto& row : sum.acceptance_rate) {
        for (auto& a : row) a /= static_cast<double>(total_sweeps);
    }

    for (std::size_t j = 0; j < m; ++j) {
        std::vector<double> sorted(sum.F_draws[j].begin(), sum.F_draws[j].end());
        std::sort(sorted.begin(), sorted.end());
        sum.F_mean.push_back(std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size()));
        sum.F_median.push_back(quantile_sorted(sorted, 0.5));
        sum.F_ci.emplace_back(quantile_sorted(sorted, 0.025), quantile_sorted(sorted, 0.975));

        if (chains >= 2 && config.retained_per_chain() >= 10) {
            std::vector<std::vector<double>> per_chain;
            for (const auto& cf : sum.chain_F_draws) per_chain.emplace_back(cf[j].begin(), cf[j].end());
            const auto diag = diagnose(per_chain);
            sum.diagnostics.push_back(diag);
            if (diag.r_hat > 1.1) {
                sum.warnings.push_back("phase " + std::to_string(j + 1) + ": R-hat " + std::to_string(diag.r_hat) +
                                       " exceeds 1.1; the chains may not have converged");
            }
        } else {
            sum.diagnostics.push_back(std::nullopt);
        }
    }
    return sum;
}

}  // namespace sbrel
