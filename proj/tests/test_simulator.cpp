#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "sbrel/simulator.hpp"

using namespace sbrel;

TEST_CASE("same seed, same simulation") {
    ScenarioConfig cfg;
    cfg.seed = 2024;
    const auto a = generate(cfg);
    const auto b = generate(cfg);
    CHECK(a.records == b.records);
    CHECK(a.truth.S == b.truth.S);
    CHECK(a.truth.t == b.truth.t);
    CHECK(a.truth.runs_cumulative == b.truth.runs_cumulative);
    cfg.seed = 2025;
    CHECK(generate(cfg).truth.S != a.truth.S);
}

TEST_CASE("t = 1 and fixed n pin S at n") {
    ScenarioConfig cfg;
    cfg.bugs_per_phase = {1, 2, 4};
    cfg.n_trials_min = cfg.n_trials_max = 3;
    cfg.t_min = cfg.t_max = 1.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        cfg.seed = seed;
        const auto sim = generate(cfg);
        for (const auto& row : sim.truth.S) {
            for (auto s : row) CHECK(s == 3);
        }
        CHECK(sim.truth.F == std::vector<std::int64_t>{3, 6, 12});
    }
}

TEST_CASE("mean eventual size is 1 + (n-1)t") {
    // one phase, so no feasibility retries condition the draws
    ScenarioConfig cfg;
    cfg.phases = 1;
    cfg.bugs_per_phase = {10};
    cfg.p_true = {0.5};
    double residual = 0.0;
    std::int64_t count = 0;
    for (std::uint64_t rep = 0; rep < 10000; ++rep) {
        cfg.seed = rep;
        const auto sim = generate(cfg);
        for (std::size_t i = 0; i < sim.truth.S[0].size(); ++i) {
            const double expected = 1.0 + double(sim.truth.n_trials[0][i] - 1) * sim.truth.t[0][i];
            residual += double(sim.truth.S[0][i]) - expected;
            ++count;
        }
    }
    CHECK(std::abs(residual / double(count)) < 0.01);
}

TEST_CASE("generated logs obey the model's invariants") {
    ScenarioConfig cfg;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        cfg.seed = seed;
        const auto sim = generate(cfg);
        const auto& g = sim.truth;
        for (std::size_t k = 1; k < g.runs_cumulative.size(); ++k) CHECK(g.runs_cumulative[k] > g.runs_cumulative[k - 1]);
        CHECK(g.runs_cumulative.front() > 0);
        CHECK(nb_feasible(g.F));
        for (std::size_t j = 0; j < g.S.size(); ++j) {
            for (std::size_t i = 0; i < g.S[j].size(); ++i) {
                CHECK(g.S[j][i] >= 1);
                CHECK(g.S[j][i] <= g.n_trials[j][i]);
                CHECK(g.observed[j][i] >= 1);
                CHECK(g.observed[j][i] <= g.S[j][i]);
            }
        }

        // re-ingest
        const auto phases = summarize_phases(sim.records, g.runs_per_phase);
        REQUIRE(phases.size() == g.S.size());
        for (std::size_t j = 0; j < phases.size(); ++j) {
            std::int64_t sum = 0;
            for (auto s : g.observed[j]) sum += s;
            CHECK(phases[j].observed_total == sum);
            CHECK(phases[j].runs_cumulative == g.runs_cumulative[j]);
            CHECK(phases[j].distinct_bugs == cfg.bugs_per_phase[j]);
        }
    }
}

TEST_CASE("written log parses back to the same records") {
    ScenarioConfig cfg;
    cfg.seed = 77;
    const auto sim = generate(cfg);
    std::stringstream ss;
    write_test_log(ss, sim.records);
    const auto parsed = parse_test_log(ss);
    CHECK(parsed.records == sim.records);
}

TEST_CASE("truth document carries every latent value") {
    ScenarioConfig cfg;
    cfg.seed = 3;
    const auto sim = generate(cfg);
    const auto doc = truth_to_json(sim.truth);
    for (const char* key : {"S", "F", "p_true", "t", "n_trials", "runs_per_phase", "runs_cumulative", "observed"}) {
        CHECK(doc.contains(key));
    }
    CHECK(doc.at("F").get<std::vector<std::int64_t>>() == sim.truth.F);
}

TEST_CASE("scenario validation and infeasible scenarios") {
    ScenarioConfig cfg;
    cfg.bugs_per_phase = {2, 3};
    CHECK_THROWS_AS(generate(cfg), ValidationError);
    cfg = {};
    cfg.t_min = 0.9;
    cfg.t_max = 0.1;
    CHECK_THROWS_AS(generate(cfg), ValidationError);
    cfg = {};
    cfg.p_true = {0.5, 1.0, 0.5};
    CHECK_THROWS_AS(generate(cfg), ValidationError);

    // F_2 = 1 can never exceed F_1 = 5
    cfg = {};
    cfg.phases = 2;
    cfg.bugs_per_phase = {5, 1};
    cfg.p_true = {0.5, 0.5};
    cfg.n_trials_min = cfg.n_trials_max = 1;
    cfg.max_retries = 50;
    CHECK_THROWS_AS(generate(cfg), ModelError);
}
