#pragma once

// Multiple-fault-class Bayesian baseline: a binomial posterior over the number
// of undetected faults, updated phase by phase, plus a harness that scores it
// against the size-biased model on simulated data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "sbrel/error.hpp"
#include "sbrel/ingest.hpp"
#include "sbrel/model.hpp"
#include "sbrel/predictor.hpp"
#include "sbrel/random.hpp"
#include "sbrel/sampler.hpp"
#include "sbrel/simulator.hpp"

namespace sbrel {

struct BaselineState {
    std::int64_t n_total = 1;
    double p = 0.5;
    double q = 0.5;
    std::int64_t detected_cum = 0;
    std::int64_t phase = 0;

    std::int64_t remaining() const noexcept { return n_total - detected_cum; }
};

struct PhaseDetection {
    std::vector<std::int64_t> counts;  // S_ij per fault class
    std::vector<double> q_detect;      // q_ij
    double q_none = 1.0;               // q_0j

    std::int64_t detected() const { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }
    double detect_sum() const { return std::accumulate(q_detect.begin(), q_detect.end(), 0.0); }

    void validate() const {
        if (counts.size() != q_detect.size()) throw ValidationError("one detection probability per fault class is required");
        for (auto c : counts) {
            if (c < 0) throw ValidationError("detection counts must be non-negative");
        }
        for (double q : q_detect) {
            if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("detection probabilities must lie in [0, 1]");
        }
        if (!(q_none >= 0.0 && q_none <= 1.0)) throw ValidationError("q_0j must lie in [0, 1]");
        if (std::abs(q_none + detect_sum() - 1.0) > 1e-12) throw ValidationError("q_0j + sum q_ij must equal 1");
    }
};

inline BaselineState baseline_initial(std::int64_t n_total, double p0) {
    if (n_total < 1) throw ValidationError("n_total must be positive");
    if (!(p0 > 0.0 && p0 < 1.0)) throw ValidationError("p0 must lie in (0, 1)");
    return {n_total, p0, 1.0 - p0, 0, 0};
}

inline BaselineState baseline_update(const BaselineState& state, const PhaseDetection& detection) {
    detection.validate();
    const double denom = 1.0 - state.p * detection.detect_sum();
    if (!(denom > 0.0)) throw DegenerateError("baseline update denominator 1 - p sum q is not positive");
    BaselineState next = state;
    next.p = state.p * detection.q_none / denom;
    next.q = state.q / denom;
    next.detected_cum += detection.detected();
    next.phase += 1;
    if (next.detected_cum > next.n_total) {
        throw ValidationError("phase " + std::to_string(next.phase) + ": cumulative detections exceed n_total");
    }
    return next;
}

// P_j(v | A_j): binomial(remaining, p_j) pmf at v.
inline double posterior_remaining(const BaselineState& state, std::int64_t v) {
    const auto rem = state.remaining();
    if (v < 0 || v > rem) return 0.0;
    const double n = static_cast<double>(rem);
    const double k = static_cast<double>(v);
    return std::exp(log_choose(n, k) + xlogy(k, state.p) + xlogy(n - k, state.q));
}

// log P(detections of phase j | A_{j-1}) under the binomial prior on remaining faults.
// Summing the multinomial over the undetected count gives
// Π q_i^{S_i} / Π S_i! · R!/(R - S)! · p^S · (1 - p Σq)^{R - S}.
inline double baseline_log_evidence(const BaselineState& prior, const PhaseDetection& detection) {
    const auto rem = prior.remaining();
    const auto found = detection.detected();
    if (found > rem) return kNegInf;
    double lp = 0.0;
    for (std::size_t i = 0; i < detection.counts.size(); ++i) {
        const double c = static_cast<double>(detection.counts[i]);
        lp += xlogy(c, detection.q_detect[i]) - std::lgamma(c + 1.0);
    }
    const double R = static_cast<double>(rem);
    const double S = static_cast<double>(found);
    lp += std::lgamma(R + 1.0) - std::lgamma(R - S + 1.0) + xlogy(S, prior.p) +
          xlog1my(R - S, prior.p * detection.detect_sum());
    return lp;
}

struct BaselineRun {
    std::vector<BaselineState> states;     // after each phase
    std::vector<double> prob_none_remaining;  // P_j(0 | A_j)
    std::optional<std::int64_t> stopping_phase;
    double log_evidence = 0.0;
};

// Smallest j with P_j(0 | A_j) >= 1 - delta.
inline BaselineRun baseline_stopping_phase(std::span<const PhaseDetection> detections, std::int64_t n_total, double p0,
                                           double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
    BaselineRun run;
    auto state = baseline_initial(n_total, p0);
    for (const auto& d : detections) {
        run.log_evidence += baseline_log_evidence(state, d);
        state = baseline_update(state, d);
        run.states.push_back(state);
        const double p_none = posterior_remaining(state, 0);
        run.prob_none_remaining.push_back(p_none);
        if (!run.stopping_phase && p_none >= 1.0 - delta) run.stopping_phase = state.phase;
    }
    return run;
}

// ---------------------------------------------------------------------------
// Model comparison on simulated data

struct CompareConfig {
    ScenarioConfig scenario;
    SamplerConfig sampler{.chains = 2, .iterations = 1500, .burn_in = 500};
    HyperConfig prior;   // m_weights defaults to the scenario's n_ij candidate range
    KdeConfig kde;
    double baseline_p0 = 0.5;
    double baseline_q = 0.5;  // single fault class detection probability per phase
    std::size_t max_cv_samples = 1000;
    unsigned threads = 0;

    void validate() const {
        scenario.validate();
        sampler.validate();
        kde.validate();
        if (scenario.phases < 3) throw ValidationError("comparison needs at least 3 phases (2 observed, 1 held out)");
        if (!(baseline_p0 > 0.0 && baseline_p0 < 1.0)) throw ValidationError("baseline p0 must lie in (0, 1)");
        if (!(baseline_q > 0.0 && baseline_q < 1.0)) throw ValidationError("baseline q must lie in (0, 1)");
    }
};

struct TrialOutcome {
    std::int64_t trial = 0;
    bool completed = false;
    std::string skipped_reason;
    double truth = 0.0;
    double prediction_size_biased = 0.0;
    double prediction_baseline = 0.0;
    double log_bayes_factor = 0.0;  // log ML(size-biased) - log ML(baseline)
};

struct ComparisonReport {
    std::int64_t trials = 0;
    std::int64_t completed = 0;
    std::int64_t skipped_baseline = 0;
    std::int64_t skipped_model = 0;
    double win_fraction = 0.0;
    double relative_mse_size_biased = 0.0;
    double relative_mse_baseline = 0.0;
    double median_log_bayes_factor = 0.0;
    double mean_log_bayes_factor = 0.0;
    double fraction_bayes_factor_favoring = 0.0;
    std::vector<TrialOutcome> outcomes;
};

// Harmonic-mean estimate of log p(N) from posterior draws of F, with p
// integrated against its Beta(alpha_hat, beta_hat) prior in closed form.
inline double harmonic_mean_log_evidence(std::span<const PhaseSummary> data, const Hyperparams& hyper,
                                         std::span<const std::vector<std::int64_t>> F_draws) {
    const auto m = data.size();
    const auto draws = F_draws.front().size();
    std::vector<double> neg_ll;
    neg_ll.reserve(draws);
    std::vector<std::int64_t> totals(m);
    for (std::size_t d = 0; d < draws; ++d) {
        for (std::size_t j = 0; j < m; ++j) totals[j] = F_draws[j][d];
        const auto r = nb_sizes(totals);
        double ll = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double n = static_cast<double>(data[j].runs_cumulative);
            const double rr = static_cast<double>(r[j]);
            const double a = hyper.alpha_hat[j];
            const double b = hyper.beta_hat[j];
            ll += std::lgamma(n + rr) - std::lgamma(n + 1.0) - std::lgamma(rr) + std::lgamma(n + a) +
                  std::lgamma(rr + b) - std::lgamma(n + rr + a + b) - (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
        }
        neg_ll.push_back(-ll);
    }
    const double top = *std::max_element(neg_ll.begin(), neg_ll.end());
    double acc = 0.0;
    for (double v : neg_ll) acc += std::exp(v - top);
    // log [ 1 / mean(1 / L) ]
    return -(top + std::log(acc / static_cast<double>(draws)));
}

inline TrialOutcome run_comparison_trial(const CompareConfig& config, std::uint64_t seed, std::int64_t index) {
    TrialOutcome out;
    out.trial = index;
    const auto trial_seed = derive_seed(seed, static_cast<std::uint64_t>(index));

    ScenarioConfig scenario = config.scenario;
    scenario.seed = trial_seed;
    const auto sim = generate(scenario);
    const auto m = static_cast<std::size_t>(scenario.phases);
    const auto observed_phases = m - 1;

    std::vector<TestLogRecord> seen;
    for (const auto& r : sim.records) {
        if (r.cycle <= static_cast<std::int64_t>(observed_phases)) seen.push_back(r);
    }
    const std::vector<std::int64_t> runs(sim.truth.runs_per_phase.begin(),
                                         sim.truth.runs_per_phase.begin() + static_cast<std::ptrdiff_t>(observed_phases));
    const auto data = summarize_phases(seen, runs);
    out.truth = static_cast<double>(sim.truth.F[m - 1]);

    // baseline: one fault class, n known
    std::vector<PhaseDetection> detections;
    for (const auto& ps : data) {
        detections.push_back({{ps.distinct_bugs}, {config.baseline_q}, 1.0 - config.baseline_q});
    }
    const auto n_total = std::accumulate(scenario.bugs_per_phase.begin(), scenario.bugs_per_phase.end(), std::int64_t{0});
    BaselineRun base;
    try {
        base = baseline_stopping_phase(detections, n_total, config.baseline_p0, 0.05);
    } catch (const DegenerateError& e) {
        out.skipped_reason = std::string("baseline: ") + e.what();
        return out;
    }
    std::int64_t observed_size = 0;
    std::int64_t observed_bugs = 0;
    for (const auto& ps : data) {
        observed_size += ps.observed_total;
        observed_bugs += ps.distinct_bugs;
    }
    const auto& last = base.states.back();
    out.prediction_baseline = static_cast<double>(last.remaining()) * last.p * static_cast<double>(observed_size) /
                              static_cast<double>(observed_bugs);

    // size-biased model
    HyperConfig prior = config.prior;
    prior.hyper_seed = derive_seed(trial_seed, 0x68ULL);
    if (!prior.m_weights.is_set()) {
        prior.m_weights.scalar = candidate_trials(scenario.n_trials_min, scenario.n_trials_max);
    }
    SamplerConfig sampler = config.sampler;
    sampler.seed = derive_seed(trial_seed, 0x73ULL);
    sampler.threads = 1;
    try {
        const auto hyper = build_hyperparams(data, prior);
        const auto post = run_chain(data, hyper, sampler);
        std::vector<double> cv;
        const auto per_phase = post.F_draws.front().size();
        const std::size_t stride = std::max<std::size_t>(1, per_phase * data.size() / config.max_cv_samples);
        for (const auto& draws : post.F_draws) {
            for (std::size_t d = 0; d < draws.size(); d += stride) cv.push_back(static_cast<double>(draws[d]));
        }
        const auto events = events_from_totals(post.F_mean);
        out.prediction_size_biased = predict_next_total(events, config.kde, cv).predicted_next_total;
        out.log_bayes_factor = harmonic_mean_log_evidence(data, hyper, post.F_draws) - base.log_evidence;
    } catch (const ModelError& e) {
        out.skipped_reason = std::string("size-biased model: ") + e.what();
        return out;
    }
    out.completed = true;
    return out;
}

// Squared-error wins (ties count half), relative MSEs and Bayes-factor summaries.
inline ComparisonReport summarize_outcomes(std::vector<TrialOutcome> outcomes) {
    const auto trials = static_cast<std::int64_t>(outcomes.size());
    ComparisonReport rep;
    rep.trials = trials;
    double wins = 0.0;
    double rel_a = 0.0;
    double rel_b = 0.0;
    std::vector<double> log_bf;
    for (const auto& o : outcomes) {
        if (!o.completed) {
            if (o.skipped_reason.starts_with("baseline")) {
                ++rep.skipped_baseline;
            } else {
                ++rep.skipped_model;
            }
            continue;
        }
        ++rep.completed;
        const double err_a = (o.prediction_size_biased - o.truth) * (o.prediction_size_biased - o.truth);
        const double err_b = (o.prediction_baseline - o.truth) * (o.prediction_baseline - o.truth);
        wins += err_a < err_b ? 1.0 : (err_a == err_b ? 0.5 : 0.0);
        rel_a += err_a / (o.truth * o.truth);
        rel_b += err_b / (o.truth * o.truth);
        log_bf.push_back(o.log_bayes_factor);
    }
    if (rep.completed > 0) {
        const double c = static_cast<double>(rep.completed);
        rep.win_fraction = wins / c;
        rep.relative_mse_size_biased = rel_a / c;
        rep.relative_mse_baseline = rel_b / c;
        rep.mean_log_bayes_factor = std::accumulate(log_bf.begin(), log_bf.end(), 0.0) / c;
        rep.fraction_bayes_factor_favoring =
            static_cast<double>(std::count_if(log_bf.begin(), log_bf.end(), [](double v) { return v > 0.0; })) / c;
        std::sort(log_bf.begin(), log_bf.end());
        rep.median_log_bayes_factor = quantile_sorted(log_bf, 0.5);
    }
    rep.outcomes = std::move(outcomes);
    return rep;
}

inline ComparisonReport compare_models(const CompareConfig& config, std::int64_t trials, std::uint64_t seed) {
    config.validate();
    if (trials < 1) throw ValidationError("trials must be positive");

    std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(trials));
    std::vector<std::exception_ptr> errors(outcomes.size());
    const auto work = [&](std::size_t k) {
        try {
            outcomes[k] = run_comparison_trial(config, seed, static_cast<std::int64_t>(k));
        } catch (...) {
            errors[k] = std::current_exception();
        }
    };
    unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, outcomes.size()));
    if (threads <= 1) {
        for (std::size_t k = 0; k < outcomes.size(); ++k) work(k);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t k = w; k < outcomes.size(); k += threads) work(k);
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    return summarize_outcomes(std::move(outcomes));
}

}  // namespace sbrel
