#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "sbrel/sampler.hpp"
#include "sbrel/simulator.hpp"

using namespace sbrel;
using Catch::Approx;

namespace {

double choose(std::int64_t n, std::int64_t k) {
    if (k < 0 || k > n) return 0.0;
    double c = 1.0;
    for (std::int64_t i = 1; i <= k; ++i) c = c * double(n - k + i) / double(i);
    return c;
}

PhaseSummary phase(std::int64_t j, std::int64_t runs, std::vector<std::int64_t> sizes) {
    PhaseSummary p;
    p.phase = j;
    p.runs_cumulative = runs;
    p.distinct_bugs = static_cast<std::int64_t>(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        p.defect_ids.push_back(100 * j + static_cast<std::int64_t>(i));
        p.observed_total += sizes[i];
    }
    p.observed_sizes = std::move(sizes);
    return p;
}

Hyperparams flat_hyper(const std::vector<PhaseSummary>& data, double rate) {
    Hyperparams h;
    for (std::size_t j = 0; j < data.size(); ++j) {
        h.mu.push_back(0.5);
        h.sigma2.push_back(1.0 / 12.0);
        h.alpha_hat.push_back(1.0);
        h.beta_hat.push_back(1.0);
        const auto nb = data[j].observed_sizes.size();
        h.a.emplace_back(nb, 1.0);
        h.b.emplace_back(nb, 1.0);
        h.proposal_rate.emplace_back(nb, rate);
        h.m_weights.emplace_back(nb, std::vector<std::int64_t>{6});
    }
    h.du_bound = 10;
    return h;
}

// 1 phase, 1 bug: unnormalized target at S with p, t fixed
double single_bug_target(std::int64_t S, std::int64_t N, std::int64_t n, double p, double t) {
    return choose(N + S - 1, N) * std::pow(1.0 - p, double(S)) * double(S) * choose(n, S) * std::pow(t, double(S)) *
           std::pow(1.0 - t, double(n - S));
}

double poisson_pmf(std::int64_t k, double rate) {
    return std::exp(double(k) * std::log(rate) - rate - std::lgamma(double(k) + 1.0));
}

// Full-kernel evaluation plus a constant; exercises the invariance of accept/reject to kernel scale.
struct OffsetKernel {
    double offset = 0.0;
    double log_kernel(const ChainState& s, std::span<const PhaseSummary> d, const Hyperparams& h) const {
        return log_posterior_S_kernel(s, d, h) + offset;
    }
    double log_ratio(const ChainState& s, std::span<const PhaseSummary> d, const Hyperparams& h, std::size_t j,
                     std::size_t i, std::int64_t v) const {
        if (v > s.n_trials[j][i] || v < std::max<std::int64_t>(d[j].observed_sizes[i], 1)) return kNegInf;
        auto moved = s;
        moved.S[j][i] = v;
        moved.recompute_totals();
        const double after = log_kernel(moved, d, h);
        if (after == kNegInf) return kNegInf;
        return after - log_kernel(s, d, h);
    }
};
static_assert(SizeKernel<OffsetKernel>);

}  // namespace

TEST_CASE("p conditional reads off the Beta parameters") {
    const std::vector<PhaseSummary> data{phase(1, 5, {1})};
    ChainState st;
    st.S = {{3}};
    st.recompute_totals();
    st.p = {0.5};
    Hyperparams h;
    h.alpha_hat = {2.0};
    h.beta_hat = {4.0};
    const auto shape = p_conditional(st, h, data, 0);
    CHECK(shape.alpha == 7.0);
    CHECK(shape.beta == 7.0);
}

TEST_CASE("p draws with N = 0, r = 1 average 1/3") {
    const std::vector<PhaseSummary> data{phase(1, 0, {1})};
    ChainState st;
    st.S = {{1}};
    st.recompute_totals();
    st.p = {0.5};
    Hyperparams h;
    h.alpha_hat = {1.0};
    h.beta_hat = {1.0};
    Rng rng(17);
    double sum = 0.0;
    const int draws = 100000;
    for (int k = 0; k < draws; ++k) sum += gibbs_update_p(st, h, data, 0, rng);
    CHECK(sum / draws == Approx(1.0 / 3.0).margin(0.005));
}

TEST_CASE("p conditional rejects infeasible states") {
    const std::vector<PhaseSummary> data{phase(1, 2, {1}), phase(2, 3, {1})};
    ChainState st;
    st.S = {{2}, {2}};
    st.recompute_totals();
    Hyperparams h;
    h.alpha_hat = {1.0, 1.0};
    h.beta_hat = {1.0, 1.0};
    CHECK_THROWS_AS(p_conditional(st, h, data, 1), InfeasibleError);
}

TEST_CASE("t conditional reads off the Beta parameters") {
    ChainState st;
    st.S = {{3}};
    st.n_trials = {{10}};
    st.t = {{0.5}};
    Hyperparams h;
    h.a = {{2.0}};
    h.b = {{2.0}};
    auto shape = t_conditional(st, h, 0, 0);
    CHECK(shape.alpha == 5.0);
    CHECK(shape.beta == 9.0);

    h.a = {{1.0}};
    h.b = {{1.0}};
    st.S = {{10}};
    shape = t_conditional(st, h, 0, 0);
    CHECK(shape.alpha == 11.0);
    CHECK(shape.beta == 1.0);
    st.S = {{0}};
    shape = t_conditional(st, h, 0, 0);
    CHECK(shape.alpha == 1.0);
    CHECK(shape.beta == 11.0);

    st.S = {{11}};
    CHECK_THROWS_AS(t_conditional(st, h, 0, 0), DomainError);
}

TEST_CASE("t draws concentrate near 1 when S = n grows") {
    Hyperparams h;
    h.a = {{1.0}};
    h.b = {{1.0}};
    Rng rng(3);
    double previous = 0.0;
    for (std::int64_t n : {2, 10, 50, 250}) {
        ChainState st;
        st.S = {{n}};
        st.n_trials = {{n}};
        st.t = {{0.5}};
        double sum = 0.0;
        for (int k = 0; k < 20000; ++k) sum += gibbs_update_t(st, h, 0, 0, rng);
        const double mean = sum / 20000.0;
        CHECK(mean == Approx(double(n + 1) / double(n + 2)).margin(0.01));
        CHECK(mean > previous);
        previous = mean;
    }
}

TEST_CASE("MH decisions match brute-force acceptance probabilities") {
    const std::int64_t N = 3, n = 5;
    const double p = 0.35, t = 0.45, rate = 2.5;
    const std::vector<PhaseSummary> data{phase(1, N, {2})};
    auto h = flat_hyper(data, rate);

    Rng rng(101);
    int checked = 0;
    for (std::int64_t start = 2; start <= n; ++start) {
        for (int rep = 0; rep < 400; ++rep) {
            ChainState st;
            st.S = {{start}};
            st.recompute_totals();
            st.p = {p};
            st.t = {{t}};
            st.n_trials = {{n}};

            Rng shadow = rng;
            const auto proposed = poisson_variate(rate, shadow);
            const double u = uniform_open(shadow);

            const auto step = mh_update_S(st, data, h, 0, 0, rng);
            double accept = 0.0;
            if (proposed == start) {
                accept = 1.0;
            } else if (proposed >= 2 && proposed <= n) {
                const double num = single_bug_target(proposed, N, n, p, t) * poisson_pmf(start, rate);
                const double den = single_bug_target(start, N, n, p, t) * poisson_pmf(proposed, rate);
                accept = std::min(1.0, num / den);
                const double log_alpha = detail::nb_kernel_part(std::vector<std::int64_t>{proposed}, data, st.p, 0) -
                                         detail::nb_kernel_part(std::vector<std::int64_t>{start}, data, st.p, 0) +
                                         detail::bug_kernel_term(proposed, 2, n, t) -
                                         detail::bug_kernel_term(start, 2, n, t) +
                                         poisson_proposal_correction(start, proposed, rate);
                CHECK(std::min(1.0, std::exp(log_alpha)) == Approx(accept).margin(1e-12));
            }
            const bool expect = proposed == start || u < accept;
            CHECK(step.accepted == expect);
            CHECK(step.value == (expect ? proposed : start));
            CHECK(st.S[0][0] == step.value);
            CHECK(st.F[0] == step.value);
            ++checked;
        }
    }
    CHECK(checked == 1600);
}

TEST_CASE("MH rejects proposals outside the support") {
    const std::vector<PhaseSummary> data{phase(1, 2, {3})};
    auto h = flat_hyper(data, 0.2);  // mostly proposes 0
    Rng rng(8);
    int zero_or_small = 0;
    for (int rep = 0; rep < 2000; ++rep) {
        ChainState st;
        st.S = {{4}};
        st.recompute_totals();
        st.p = {0.5};
        st.t = {{0.5}};
        st.n_trials = {{6}};
        Rng shadow = rng;
        const auto proposed = poisson_variate(0.2, shadow);
        const auto step = mh_update_S(st, data, h, 0, 0, rng);
        if (proposed < 3) {
            ++zero_or_small;
            CHECK_FALSE(step.accepted);
            CHECK(st.S[0][0] == 4);
        }
    }
    CHECK(zero_or_small > 1500);
}

TEST_CASE("single-bug MH chain reproduces the enumerated posterior") {
    const std::int64_t N = 4, n = 6;
    const double p = 0.4, t = 0.55;
    const std::vector<PhaseSummary> data{phase(1, N, {1})};
    auto h = flat_hyper(data, 3.0);

    std::vector<double> exact(n + 1, 0.0);
    double z = 0.0;
    for (std::int64_t s = 1; s <= n; ++s) z += exact[s] = single_bug_target(s, N, n, p, t);
    for (auto& e : exact) e /= z;

    ChainState st;
    st.S = {{1}};
    st.recompute_totals();
    st.p = {p};
    st.t = {{t}};
    st.n_trials = {{n}};
    Rng rng(2718);
    std::vector<double> counts(n + 1, 0.0);
    const int draws = 40000;
    for (int k = 0; k < 1000; ++k) mh_update_S(st, data, h, 0, 0, rng);
    for (int k = 0; k < draws; ++k) {
        mh_update_S(st, data, h, 0, 0, rng);
        counts[static_cast<std::size_t>(st.S[0][0])] += 1.0;
    }
    double tv = 0.0;
    for (std::size_t s = 0; s < counts.size(); ++s) tv += std::abs(counts[s] / draws - exact[s]);
    CHECK(0.5 * tv < 0.03);
}

TEST_CASE("constant kernel offsets leave every decision unchanged") {
    const std::vector<PhaseSummary> data{phase(1, 4, {1, 2}), phase(2, 9, {1, 1, 2})};
    HyperConfig hc;
    hc.hyper_seed = 4;
    hc.m_weights.scalar = std::vector<std::int64_t>{3, 5, 7, 9};
    const auto h = build_hyperparams(data, hc);
    SamplerConfig cfg;
    cfg.chains = 2;
    cfg.iterations = 600;
    cfg.burn_in = 100;
    cfg.seed = 55;
    cfg.keep_state_draws = true;

    const auto base = run_chain(data, h, cfg, OffsetKernel{0.0});
    for (double offset : {1.0, -250.5, 1e4}) {
        const auto shifted = run_chain(data, h, cfg, OffsetKernel{offset});
        CHECK(shifted.S_draws == base.S_draws);
    }
    const auto incremental = run_chain(data, h, cfg);
    CHECK(incremental.S_draws == base.S_draws);
}

TEST_CASE("chains are reproducible and independent of thread count") {
    const std::vector<PhaseSummary> data{phase(1, 3, {1, 3}), phase(2, 8, {2, 1, 1})};
    HyperConfig hc;
    hc.hyper_seed = 21;
    const auto h = build_hyperparams(data, hc);
    SamplerConfig cfg;
    cfg.chains = 4;
    cfg.iterations = 800;
    cfg.burn_in = 200;
    cfg.thin = 3;
    cfg.seed = 77;

    cfg.threads = 1;
    const auto a = run_chain(data, h, cfg);
    const auto b = run_chain(data, h, cfg);
    cfg.threads = 4;
    const auto c = run_chain(data, h, cfg);
    CHECK(a.F_draws == b.F_draws);
    CHECK(a.F_draws == c.F_draws);
    CHECK(a.F_mean == c.F_mean);
    CHECK(a.F_draws[0].size() == static_cast<std::size_t>(4 * cfg.retained_per_chain()));
    CHECK(cfg.retained_per_chain() == 200);

    cfg.seed = 78;
    CHECK(run_chain(data, h, cfg).F_draws != a.F_draws);
}

TEST_CASE("F draws are row sums of the retained S draws") {
    const std::vector<PhaseSummary> data{phase(1, 2, {1, 1}), phase(2, 6, {1, 2, 1})};
    HyperConfig hc;
    hc.hyper_seed = 3;
    const auto h = build_hyperparams(data, hc);
    SamplerConfig cfg;
    cfg.chains = 3;
    cfg.iterations = 500;
    cfg.burn_in = 50;
    cfg.seed = 9;
    cfg.keep_state_draws = true;
    const auto post = run_chain(data, h, cfg);
    REQUIRE(post.S_draws.size() == post.F_draws[0].size());
    for (std::size_t d = 0; d < post.S_draws.size(); ++d) {
        for (std::size_t j = 0; j < 2; ++j) {
            const auto& row = post.S_draws[d][j];
            CHECK(std::accumulate(row.begin(), row.end(), std::int64_t{0}) == post.F_draws[j][d]);
            for (std::size_t i = 0; i < row.size(); ++i) CHECK(row[i] >= std::max<std::int64_t>(data[j].observed_sizes[i], 1));
        }
    }
    for (const auto& row : post.acceptance_rate) {
        for (double r : row) {
            CHECK(r >= 0.0);
            CHECK(r <= 1.0);
        }
    }
}

TEST_CASE("no slack: S pinned at s = n") {
    const std::vector<PhaseSummary> data{phase(1, 5, {3, 4})};
    HyperConfig hc;
    hc.hyper_seed = 1;
    hc.m_weights.matrix = Ragged<std::vector<std::int64_t>>{{{3}, {4}}};
    const auto h = build_hyperparams(data, hc);
    SamplerConfig cfg;
    cfg.chains = 2;
    cfg.iterations = 300;
    cfg.burn_in = 50;
    const auto post = run_chain(data, h, cfg);
    for (auto f : post.F_draws[0]) CHECK(f == 7);
    REQUIRE(post.diagnostics[0]);
    CHECK(post.diagnostics[0]->degenerate);
}

TEST_CASE("initialization fails when no n_ij can hold the observed size") {
    const std::vector<PhaseSummary> data{phase(1, 5, {8})};
    HyperConfig hc;
    hc.m_weights.scalar = std::vector<std::int64_t>{2, 4};
    const auto h = build_hyperparams(data, hc);
    SamplerConfig cfg;
    cfg.iterations = 20;
    cfg.burn_in = 0;
    CHECK_THROWS_AS(run_chain(data, h, cfg), InitializationError);
}

TEST_CASE("sampler config validation") {
    SamplerConfig cfg;
    cfg.burn_in = cfg.iterations;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = {};
    cfg.thin = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = {};
    cfg.chains = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("posterior intervals cover simulated truth") {
    // 2 phases, 3 bugs, n_ij up to 20
    int covered = 0, total = 0;
    for (int rep = 0; rep < 50; ++rep) {
        ScenarioConfig sc;
        sc.seed = 500 + static_cast<std::uint64_t>(rep);
        sc.phases = 2;
        sc.bugs_per_phase = {1, 2};
        sc.p_true = {0.5, 0.5};
        sc.n_trials_min = 2;
        sc.n_trials_max = 20;
        const auto sim = generate(sc);
        const auto data = summarize_phases(sim.records, sim.truth.runs_per_phase);

        HyperConfig hc;
        hc.m_weights.scalar = candidate_trials(sc.n_trials_min, sc.n_trials_max);
        hc.mu = std::vector<double>{0.5};
        hc.proposal_rate.scalar = 5.0;
        hc.hyper_seed = 7 + static_cast<std::uint64_t>(rep);
        const auto h = build_hyperparams(data, hc);

        SamplerConfig cfg;
        cfg.chains = 4;
        cfg.iterations = 3000;
        cfg.burn_in = 750;
        cfg.seed = 99 + static_cast<std::uint64_t>(rep);
        const auto post = run_chain(data, h, cfg);
        for (std::size_t j = 0; j < 2; ++j) {
            const double F = static_cast<double>(sim.truth.F[j]);
            covered += F >= post.F_ci[j].first && F <= post.F_ci[j].second;
            ++total;
        }
    }
    INFO("covered " << covered << " of " << total);
    CHECK(double(covered) / total >= 0.9);
}
