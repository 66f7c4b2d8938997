#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "sbrel/baseline.hpp"

using namespace sbrel;
using Catch::Approx;

namespace {

PhaseDetection detection(std::vector<std::int64_t> counts, std::vector<double> q) {
    PhaseDetection d;
    d.counts = std::move(counts);
    d.q_detect = std::move(q);
    d.q_none = 1.0 - d.detect_sum();
    return d;
}

double factorial(std::int64_t n) { return std::tgamma(double(n) + 1.0); }

}  // namespace

TEST_CASE("baseline update examples") {
    const auto s0 = baseline_initial(10, 0.5);
    const auto none = baseline_update(s0, detection({0, 0}, {0.0, 0.0}));
    CHECK(none.p == s0.p);
    CHECK(none.q == s0.q);

    const auto s1 = baseline_update(s0, detection({1, 1}, {0.25, 0.15}));
    CHECK(s1.p == Approx(0.375).margin(1e-15));
    CHECK(s1.q == Approx(0.625).margin(1e-15));
    CHECK(s1.detected_cum == 2);
    CHECK(s1.phase == 1);
}

TEST_CASE("baseline update keeps p + q = 1") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto state = baseline_initial(1000000, 0.5);
    for (int k = 0; k < 10000; ++k) {
        if (k % 50 == 0) state = baseline_initial(1000000, 0.01 + 0.98 * u(rng));
        const int classes = 1 + static_cast<int>(rng() % 4);
        std::vector<double> q;
        const double budget = u(rng);
        double left = budget;
        for (int c = 0; c + 1 < classes; ++c) {
            q.push_back(left * u(rng));
            left -= q.back();
        }
        q.push_back(left);
        std::vector<std::int64_t> counts(q.size());
        for (auto& c : counts) c = static_cast<std::int64_t>(rng() % 3);
        state = baseline_update(state, detection(counts, q));
        CHECK(std::abs(state.p + state.q - 1.0) < 1e-12);
    }
}

TEST_CASE("baseline update depends only on the class sums") {
    const auto s0 = baseline_initial(20, 0.6);
    const auto a = baseline_update(s0, detection({3, 0, 1}, {0.1, 0.2, 0.1}));
    const auto b = baseline_update(s0, detection({4}, {0.4}));
    CHECK(a.p == Approx(b.p).margin(1e-15));
    CHECK(a.q == Approx(b.q).margin(1e-15));
    CHECK(a.detected_cum == b.detected_cum);
}

TEST_CASE("baseline update input checks") {
    const auto s0 = baseline_initial(3, 0.5);
    PhaseDetection bad = detection({1}, {0.3});
    bad.q_none = 0.5;
    CHECK_THROWS_AS(baseline_update(s0, bad), ValidationError);
    CHECK_THROWS_AS(baseline_update(s0, detection({4}, {0.3})), ValidationError);
    BaselineState certain{3, 1.0, 0.0, 0, 0};
    CHECK_THROWS_AS(baseline_update(certain, detection({0}, {1.0})), DegenerateError);
    CHECK_THROWS_AS(baseline_initial(0, 0.5), ValidationError);
    CHECK_THROWS_AS(baseline_initial(3, 1.0), ValidationError);
}

TEST_CASE("posterior over remaining faults") {
    auto s = baseline_initial(12, 0.3);
    s = baseline_update(s, detection({2, 1}, {0.2, 0.2}));
    CHECK(posterior_remaining(s, 0) == Approx(std::pow(s.q, double(s.remaining()))).epsilon(1e-14));
    double total = 0.0;
    for (std::int64_t v = 0; v <= s.remaining(); ++v) total += posterior_remaining(s, v);
    CHECK(std::abs(total - 1.0) < 1e-10);
    CHECK(posterior_remaining(s, -1) == 0.0);
    CHECK(posterior_remaining(s, s.remaining() + 1) == 0.0);

    auto done = baseline_initial(4, 0.5);
    done = baseline_update(done, detection({4}, {0.5}));
    CHECK(posterior_remaining(done, 0) == 1.0);
    CHECK(posterior_remaining(done, 1) == 0.0);
}

TEST_CASE("posterior is a proper pmf on every reachable state") {
    // 3 phases, 2 classes, n = 6
    const std::vector<double> q{0.3, 0.2};
    for (std::int64_t a1 = 0; a1 <= 6; ++a1) {
        for (std::int64_t a2 = 0; a1 + a2 <= 6; ++a2) {
            for (std::int64_t a3 = 0; a1 + a2 + a3 <= 6; ++a3) {
                auto s = baseline_initial(6, 0.5);
                for (auto c : {a1, a2, a3}) {
                    s = baseline_update(s, detection({c, 0}, q));
                    double total = 0.0;
                    for (std::int64_t v = 0; v <= s.remaining(); ++v) total += posterior_remaining(s, v);
                    CHECK(std::abs(total - 1.0) < 1e-10);
                }
            }
        }
    }
}

TEST_CASE("log evidence matches the sum over undetected counts") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (int rep = 0; rep < 200; ++rep) {
        const std::int64_t n = 2 + static_cast<std::int64_t>(rng() % 10);
        const double p = u(rng);
        const auto s = baseline_initial(n, p);
        const double q1 = 0.5 * u(rng);
        const double q2 = 0.5 * u(rng);
        const double q0 = 1.0 - q1 - q2;
        const std::int64_t c1 = static_cast<std::int64_t>(rng() % 3);
        const std::int64_t c2 = static_cast<std::int64_t>(rng() % 3);
        const auto d = detection({c1, c2}, {q1, q2});
        // Σ_v Binom(v; n, p) Multinomial(c1, c2, v - c1 - c2; q1, q2, q0)
        double direct = 0.0;
        for (std::int64_t v = c1 + c2; v <= n; ++v) {
            const double binom = factorial(n) / (factorial(v) * factorial(n - v)) * std::pow(p, double(v)) *
                                 std::pow(1.0 - p, double(n - v));
            const auto rest = v - c1 - c2;
            const double multi = factorial(v) / (factorial(c1) * factorial(c2) * factorial(rest)) *
                                 std::pow(q1, double(c1)) * std::pow(q2, double(c2)) * std::pow(q0, double(rest));
            direct += binom * multi;
        }
        if (c1 + c2 > n) {
            CHECK(baseline_log_evidence(s, d) == kNegInf);
        } else {
            CHECK(baseline_log_evidence(s, d) == Approx(std::log(direct)).margin(1e-10));
        }
    }
}

TEST_CASE("stopping phase examples") {
    const std::vector<double> q{0.4, 0.2};
    // all 5 faults found by phase 2
    const std::vector<PhaseDetection> exhaust{detection({1, 1}, q), detection({2, 1}, q), detection({0, 0}, q)};
    for (double delta : {1e-6, 0.01, 0.5}) {
        CHECK(baseline_stopping_phase(exhaust, 5, 0.5, delta).stopping_phase == 2);
    }

    // nothing found, p0 = 0.9, n = 10: P(0) = q_j^10 stays tiny
    const std::vector<PhaseDetection> quiet{detection({0}, {0.3}), detection({0}, {0.3})};
    const auto run = baseline_stopping_phase(quiet, 10, 0.9, 0.05);
    CHECK_FALSE(run.stopping_phase.has_value());
    const double p1 = 0.9 * 0.7 / (1.0 - 0.9 * 0.3);
    const double p2 = p1 * 0.7 / (1.0 - p1 * 0.3);
    CHECK(run.prob_none_remaining[0] == Approx(std::pow(1.0 - p1, 10.0)).epsilon(1e-12));
    CHECK(run.prob_none_remaining[1] == Approx(std::pow(1.0 - p2, 10.0)).epsilon(1e-12));
    CHECK(run.prob_none_remaining[1] < 0.95);
}

TEST_CASE("probability of no remaining faults never falls") {
    const std::vector<PhaseDetection> phases{detection({2, 1}, {0.3, 0.3}), detection({1, 0}, {0.2, 0.3}),
                                             detection({0, 1}, {0.4, 0.1})};
    const auto run = baseline_stopping_phase(phases, 9, 0.6, 0.01);
    REQUIRE(run.prob_none_remaining.size() == 3);
    CHECK(run.prob_none_remaining[1] >= run.prob_none_remaining[0]);
    CHECK(run.prob_none_remaining[2] >= run.prob_none_remaining[1]);
}

TEST_CASE("stopping phase never moves later as delta grows") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 300; ++rep) {
        const std::int64_t n = 3 + static_cast<std::int64_t>(rng() % 8);
        std::vector<PhaseDetection> ds;
        std::int64_t found = 0;
        for (int j = 0; j < 6; ++j) {
            const auto c = found < n ? static_cast<std::int64_t>(rng() % 2) : 0;
            found += c;
            ds.push_back(detection({c}, {0.2 + 0.6 * u(rng)}));
        }
        const double d1 = 0.001 + 0.5 * u(rng);
        const double d2 = d1 + (0.998 - d1) * u(rng);
        const double p0 = 0.2 + 0.6 * u(rng);
        const auto lo = baseline_stopping_phase(ds, n, p0, d1).stopping_phase;
        const auto hi = baseline_stopping_phase(ds, n, p0, d2).stopping_phase;
        if (lo) {
            REQUIRE(hi);
            CHECK(*hi <= *lo);
        }
    }
}

TEST_CASE("harmonic-mean evidence with a single draw is the beta-NB marginal") {
    std::vector<PhaseSummary> data(2);
    data[0].phase = 1;
    data[0].runs_cumulative = 4;
    data[0].observed_sizes = {1};
    data[1].phase = 2;
    data[1].runs_cumulative = 9;
    data[1].observed_sizes = {2};
    Hyperparams h;
    h.alpha_hat = {1.5, 0.7};
    h.beta_hat = {2.0, 3.1};
    const std::vector<std::vector<std::int64_t>> F{{3, 3, 3}, {8, 8, 8}};

    // ∫ NB(N; r, p) Beta(p; a, b) dp per phase
    using boost::math::quadrature::gauss_kronrod;
    double expected = 0.0;
    const std::int64_t r[2] = {3, 5};
    for (int j = 0; j < 2; ++j) {
        const double a = h.alpha_hat[j];
        const double b = h.beta_hat[j];
        const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
        const auto f = [&](double p) {
            return std::exp(log_nb_pmf(data[j].runs_cumulative, r[j], p) + (a - 1.0) * std::log(p) +
                            (b - 1.0) * std::log1p(-p) - lbeta);
        };
        expected += std::log(gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 20, 1e-13));
    }
    CHECK(harmonic_mean_log_evidence(data, h, F) == Approx(expected).margin(1e-8));
}

TEST_CASE("ties count half") {
    std::vector<TrialOutcome> outcomes(4);
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
        outcomes[k].trial = static_cast<std::int64_t>(k);
        outcomes[k].completed = true;
        outcomes[k].truth = 10.0;
        outcomes[k].prediction_size_biased = 12.0;
        outcomes[k].prediction_baseline = 8.0;
    }
    outcomes[0].prediction_size_biased = 10.0;  // outright win
    outcomes[3].completed = false;
    outcomes[3].skipped_reason = "baseline: degenerate";
    const auto rep = summarize_outcomes(outcomes);
    CHECK(rep.completed == 3);
    CHECK(rep.skipped_baseline == 1);
    CHECK(rep.win_fraction == Approx((1.0 + 0.5 + 0.5) / 3.0));
    CHECK(rep.relative_mse_baseline == Approx(0.04));
    CHECK(rep.relative_mse_size_biased == Approx((0.0 + 0.04 + 0.04) / 3.0));
}

TEST_CASE("comparison is reproducible") {
    CompareConfig cfg;
    cfg.sampler.iterations = 400;
    cfg.sampler.burn_in = 100;
    cfg.threads = 1;
    const auto a = compare_models(cfg, 1, 42);
    const auto b = compare_models(cfg, 1, 42);
    REQUIRE(a.outcomes.size() == 1);
    CHECK(a.outcomes[0].prediction_size_biased == b.outcomes[0].prediction_size_biased);
    CHECK(a.outcomes[0].log_bayes_factor == b.outcomes[0].log_bayes_factor);
    CHECK(a.win_fraction == b.win_fraction);

    const auto serial = compare_models(cfg, 6, 7);
    cfg.threads = 4;
    const auto parallel = compare_models(cfg, 6, 7);
    for (std::size_t k = 0; k < 6; ++k) {
        CHECK(serial.outcomes[k].truth == parallel.outcomes[k].truth);
        CHECK(serial.outcomes[k].prediction_size_biased == parallel.outcomes[k].prediction_size_biased);
        CHECK(serial.outcomes[k].prediction_baseline == parallel.outcomes[k].prediction_baseline);
    }
    CHECK(serial.win_fraction >= 0.0);
    CHECK(serial.win_fraction <= 1.0);
}

TEST_CASE("comparison input checks") {
    CompareConfig cfg;
    cfg.scenario.phases = 2;
    cfg.scenario.bugs_per_phase = {2, 3};
    cfg.scenario.p_true = {0.5, 0.5};
    CHECK_THROWS_AS(compare_models(cfg, 3, 1), ValidationError);
    CHECK_THROWS_AS(compare_models(CompareConfig{}, 0, 1), ValidationError);
}
