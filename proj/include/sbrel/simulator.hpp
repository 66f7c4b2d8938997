#pragma once

// Synthetic testing logs with known latent sizes, drawn from the model's own
// generative assumptions.

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbrel/error.hpp"
#include "sbrel/ingest.hpp"
#include "sbrel/model.hpp"
#include "sbrel/random.hpp"

namespace sbrel {

struct ScenarioConfig {
    std::int64_t phases = 3;
    std::vector<std::int64_t> bugs_per_phase{2, 3, 5};
    std::int64_t n_trials_min = 4;
    std::int64_t n_trials_max = 12;
    double t_min = 0.2;
    double t_max = 0.8;
    std::vector<double> p_true{0.5, 0.5, 0.5};
    std::uint64_t seed = 0;
    double exposure_scale = 100.0;  // c in pi_j = N_j / (N_j + c)
    std::int64_t max_retries = 1000;

    void validate() const {
        if (phases < 1) throw ValidationError("scenario needs at least one phase");
        if (static_cast<std::int64_t>(bugs_per_phase.size()) != phases)
            throw ValidationError("bugs_per_phase needs one entry per phase");
        for (auto b : bugs_per_phase) {
            if (b < 1) throw ValidationError("bugs_per_phase entries must be positive");
        }
        if (n_trials_min < 1 || n_trials_max < n_trials_min) throw ValidationError("n_trials range must satisfy 1 <= min <= max");
        if (!(t_min > 0.0 && t_min <= t_max && t_max <= 1.0)) throw ValidationError("t range must satisfy 0 < min <= max <= 1");
        if (static_cast<std::int64_t>(p_true.size()) != phases) throw ValidationError("p_true needs one entry per phase");
        for (double p : p_true) {
            if (!(p > 0.0 && p < 1.0)) throw ValidationError("p_true entries must lie in (0, 1)");
        }
        if (!(exposure_scale > 0.0)) throw ValidationError("exposure_scale must be positive");
        if (max_retries < 1) throw ValidationError("max_retries must be positive");
    }
};

struct GroundTruth {
    Ragged<std::int64_t> S;         // eventual sizes
    Ragged<std::int64_t> observed;  // s_ij
    Ragged<double> t;
    Ragged<std::int64_t> n_trials;
    std::vector<std::int64_t> F;
    std::vector<std::int64_t> runs_per_phase;  // increments
    std::vector<std::int64_t> runs_cumulative;
    std::vector<double> p_true;
    std::int64_t attempts = 0;
};

struct Simulation {
    std::vector<TestLogRecord> records;
    GroundTruth truth;
};

inline std::vector<std::int64_t> candidate_trials(std::int64_t lo, std::int64_t hi) {
    std::vector<std::int64_t> row;
    for (auto v = lo; v <= hi; ++v) row.push_back(v);
    return row;
}

inline Simulation generate(const ScenarioConfig& config) {
    config.validate();
    Rng rng(derive_seed(config.seed, 0x73696dULL));
    const auto m = static_cast<std::size_t>(config.phases);
    const auto row = candidate_trials(config.n_trials_min, config.n_trials_max);

    for (std::int64_t attempt = 1; attempt <= config.max_retries; ++attempt) {
        GroundTruth g;
        g.attempts = attempt;
        g.p_true = config.p_true;
        g.S.resize(m);
        g.t.resize(m);
        g.n_trials.resize(m);
        for (std::size_t j = 0; j < m; ++j) {
            for (std::int64_t i = 0; i < config.bugs_per_phase[j]; ++i) {
                const auto n = sample_n_trials(row, rng);
                const double t = config.t_min == config.t_max
                                     ? config.t_min
                                     : config.t_min + (config.t_max - config.t_min) * uniform_open(rng);
                const auto s = size_biased_pmf(binomial_pmf(n, t)).sample(rng);
                g.n_trials[j].push_back(n);
                g.t[j].push_back(t);
                g.S[j].push_back(s);
            }
        }
        g.F.assign(m, 0);
        for (std::size_t j = 0; j < m; ++j) {
            for (auto s : g.S[j]) g.F[j] += s;
        }
        if (!nb_feasible(g.F)) continue;

        const auto r = nb_sizes(g.F);
        bool increasing = true;
        std::int64_t cumulative = 0;
        for (std::size_t k = 0; k < m; ++k) {
            const auto inc = negative_binomial_variate(r[k], config.p_true[k], rng);
            if (inc < 1) {
                increasing = false;
                break;
            }
            cumulative += inc;
            g.runs_per_phase.push_back(inc);
            g.runs_cumulative.push_back(cumulative);
        }
        if (!increasing) continue;

        // an identified bug has its identifying input; the rest of its eventual
        // inputs are observed independently with exposure pi_j
        Simulation sim;
        g.observed.resize(m);
        std::int64_t next_id = 1;
        for (std::size_t j = 0; j < m; ++j) {
            const double runs = static_cast<double>(g.runs_cumulative[j]);
            const double exposure = runs / (runs + config.exposure_scale);
            for (std::size_t i = 0; i < g.S[j].size(); ++i) {
                const auto s = 1 + binomial_variate(g.S[j][i] - 1, exposure, rng);
                g.observed[j].push_back(s);
                TestLogRecord rec;
                rec.cycle = static_cast<std::int64_t>(j + 1);
                rec.defect_header = static_cast<std::int64_t>(i + 1);
                rec.defect_id = next_id++;
                rec.size = s;
                sim.records.push_back(rec);
            }
        }
        sim.truth = std::move(g);
        return sim;
    }
    throw ModelError("scenario infeasible: no draw with positive negative binomial sizes and increasing runs after " +
                     std::to_string(config.max_retries) + " attempts");
}

inline void write_test_log(std::ostream& os, std::span<const TestLogRecord> records) {
    os << "cycle,defect_header,defect_id,size\n";
    for (const auto& r : records) os << r.cycle << ',' << r.defect_header << ',' << r.defect_id << ',' << r.size << '\n';
}

inline nlohmann::ordered_json truth_to_json(const GroundTruth& g) {
    nlohmann::ordered_json o;
    o["runs_per_phase"] = g.runs_per_phase;
    o["runs_cumulative"] = g.runs_cumulative;
    o["F"] = g.F;
    o["S"] = g.S;
    o["observed"] = g.observed;
    o["n_trials"] = g.n_trials;
    o["t"] = g.t;
    o["p_true"] = g.p_true;
    o["attempts"] = g.attempts;
    return o;
}

}  // namespace sbrel
