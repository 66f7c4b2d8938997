#pragma once

// Report documents emitted by the CLI. Field order is fixed (ordered_json) and
// numbers are written without locale involvement.

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sbrel/baseline.hpp"
#include "sbrel/config.hpp"
#include "sbrel/ingest.hpp"
#include "sbrel/predictor.hpp"
#include "sbrel/sampler.hpp"

namespace sbrel {

enum class OutputFormat { document, table };

inline constexpr int kReportVersion = 1;

inline Json report_header(const char* stage, std::uint64_t seed, const Json& config) {
    Json o;
    o["report"] = stage;
    o["version"] = kReportVersion;
    o["seed"] = seed;
    o["config_hash"] = config_hash(config);
    o["config"] = config;
    return o;
}

inline Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline std::string table_number(double v) {
    if (!std::isfinite(v)) return "";
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << v;
    return os.str();
}

// ---------------------------------------------------------------------------
// ingest

inline Json ingest_report(std::span<const PhaseSummary> phases, std::uint64_t seed, const Json& config) {
    auto o = report_header("ingest", seed, config);
    o["phases"] = phases_to_json(phases);
    return o;
}

inline void ingest_table(std::ostream& os, std::span<const PhaseSummary> phases) {
    os << "phase,runs_cumulative,distinct_bugs,defect_id,size\n";
    for (const auto& ps : phases) {
        for (std::size_t i = 0; i < ps.observed_sizes.size(); ++i) {
            os << ps.phase << ',' << ps.runs_cumulative << ',' << ps.distinct_bugs << ','
               << (ps.defect_ids.empty() ? static_cast<std::int64_t>(i + 1) : ps.defect_ids[i]) << ','
               << ps.observed_sizes[i] << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// fit

struct FitPhaseRow {
    std::int64_t phase = 1;
    std::int64_t runs_cumulative = 0;
    std::int64_t distinct_bugs = 0;
    std::int64_t observed_total = 0;
    double F_mean = 0.0;
    double F_median = 0.0;
    double F_ci_low = 0.0;
    double F_ci_high = 0.0;
    std::optional<double> r_hat;  // null with one chain or a non-finite value
    std::optional<double> ess;
    bool degenerate = false;

    friend bool operator==(const FitPhaseRow&, const FitPhaseRow&) = default;
};

inline Json to_json(const FitPhaseRow& r) {
    Json p;
    p["phase"] = r.phase;
    p["runs_cumulative"] = r.runs_cumulative;
    p["distinct_bugs"] = r.distinct_bugs;
    p["observed_total"] = r.observed_total;
    p["F_mean"] = r.F_mean;
    p["F_median"] = r.F_median;
    p["F_ci_low"] = r.F_ci_low;
    p["F_ci_high"] = r.F_ci_high;
    p["r_hat"] = r.r_hat ? Json(*r.r_hat) : Json(nullptr);
    p["ess"] = r.ess ? Json(*r.ess) : Json(nullptr);
    p["degenerate"] = r.degenerate;
    return p;
}

// Reads the "phases" array of a fit report.
inline std::vector<FitPhaseRow> parse_fit_phases(const Json& report) {
    if (report.value("report", std::string()) != "fit") throw ValidationError("not a fit report");
    std::vector<FitPhaseRow> rows;
    try {
        for (const auto& p : report.at("phases")) {
            FitPhaseRow r;
            r.phase = p.at("phase").get<std::int64_t>();
            r.runs_cumulative = p.at("runs_cumulative").get<std::int64_t>();
            r.distinct_bugs = p.at("distinct_bugs").get<std::int64_t>();
            r.observed_total = p.at("observed_total").get<std::int64_t>();
            r.F_mean = p.at("F_mean").get<double>();
            r.F_median = p.at("F_median").get<double>();
            r.F_ci_low = p.at("F_ci_low").get<double>();
            r.F_ci_high = p.at("F_ci_high").get<double>();
            if (!p.at("r_hat").is_null()) r.r_hat = p.at("r_hat").get<double>();
            if (!p.at("ess").is_null()) r.ess = p.at("ess").get<double>();
            r.degenerate = p.at("degenerate").get<bool>();
            rows.push_back(r);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed fit report: ") + e.what());
    }
    return rows;
}

inline Json fit_report(std::span<const PhaseSummary> data, const PosteriorSummary& post, const SamplerConfig& sampler,
                       std::uint64_t seed, const Json& config) {
    auto o = report_header("fit", seed, config);
    auto phases = Json::array();
    for (std::size_t j = 0; j < data.size(); ++j) {
        FitPhaseRow r;
        r.phase = data[j].phase;
        r.runs_cumulative = data[j].runs_cumulative;
        r.distinct_bugs = data[j].distinct_bugs;
        r.observed_total = data[j].observed_total;
        r.F_mean = post.F_mean[j];
        r.F_median = post.F_median[j];
        r.F_ci_low = post.F_ci[j].first;
        r.F_ci_high = post.F_ci[j].second;
        if (const auto& d = post.diagnostics[j]) {
            if (std::isfinite(d->r_hat)) r.r_hat = d->r_hat;
            if (std::isfinite(d->ess)) r.ess = d->ess;
            r.degenerate = d->degenerate;
        }
        phases.push_back(to_json(r));
    }
    o["phases"] = std::move(phases);
    Json g;
    g["acceptance_rate_mean"] = post.mean_acceptance();
    g["chains"] = sampler.chains;
    g["iterations"] = sampler.iterations;
    g["burn_in"] = sampler.burn_in;
    g["thin"] = sampler.thin;
    g["retained_draws"] = sampler.chains * sampler.retained_per_chain();
    g["seed"] = sampler.seed;
    o["global"] = std::move(g);
    o["warnings"] = post.warnings;
    return o;
}

inline void fit_table(std::ostream& os, const Json& report) {
    os << "phase,F_mean,F_median,F_ci_low,F_ci_high,r_hat,ess\n";
    for (const auto& p : report.at("phases")) {
        const auto num = [&](const char* k) {
            return p.at(k).is_null() ? std::string() : table_number(p.at(k).get<double>());
        };
        os << p.at("phase").get<std::int64_t>() << ',' << num("F_mean") << ',' << num("F_median") << ','
           << num("F_ci_low") << ',' << num("F_ci_high") << ',' << num("r_hat") << ',' << num("ess") << '\n';
    }
}

// Raw draws: one row per (retained iteration, chain, phase).
inline void write_draws(std::ostream& os, const PosteriorSummary& post, const SamplerConfig& sampler) {
    os << "iteration,chain,phase,F\n";
    for (std::size_t c = 0; c < post.chain_F_draws.size(); ++c) {
        const auto& chain = post.chain_F_draws[c];
        for (std::size_t d = 0; d < chain.front().size(); ++d) {
            const auto iteration = sampler.burn_in + static_cast<std::int64_t>(d) * sampler.thin;
            for (std::size_t j = 0; j < chain.size(); ++j) {
                os << iteration << ',' << c << ',' << (j + 1) << ',' << chain[j][d] << '\n';
            }
        }
    }
}

// ---------------------------------------------------------------------------
// predict / decide

inline Json decision_json(const StopDecision& d) {
    Json o;
    o["verdict"] = d.stop_after_phase ? "stop" : "continue";
    o["stop_after_phase"] = d.stop_after_phase ? Json(*d.stop_after_phase) : Json(nullptr);
    return o;
}

inline Json predict_report(std::span<const double> totals, const Prediction& pred, double epsilon,
                           const StopDecision& decision, std::uint64_t seed, const Json& config) {
    auto o = report_header("predict", seed, config);
    o["totals"] = std::vector<double>(totals.begin(), totals.end());
    o["predicted_next_total"] = pred.predicted_next_total;
    o["predicted_median"] = pred.median;
    o["predicted_mode"] = pred.mode;
    o["h_selected"] = pred.bandwidth;
    o["prediction_time"] = pred.prediction_time;
    o["truncated_mass"] = pred.truncated_mass;
    o["weights"] = pred.weights;
    o["epsilon"] = epsilon;
    o["decision"] = decision_json(decision);
    return o;
}

inline Json decide_report(std::span<const double> totals, double epsilon, const StopDecision& decision,
                          std::uint64_t seed, const Json& config) {
    auto o = report_header("decide", seed, config);
    o["totals"] = std::vector<double>(totals.begin(), totals.end());
    o["epsilon"] = epsilon;
    o["verdict"] = decision.stop_after_phase ? "stop" : "continue";
    o["stop_after_phase"] = decision.stop_after_phase ? Json(*decision.stop_after_phase) : Json(nullptr);
    return o;
}

// ---------------------------------------------------------------------------
// baseline / compare

inline Json baseline_report(const BaselineRun& run, double delta, std::uint64_t seed, const Json& config) {
    auto o = report_header("baseline", seed, config);
    auto phases = Json::array();
    for (std::size_t k = 0; k < run.states.size(); ++k) {
        Json p;
        p["phase"] = run.states[k].phase;
        p["p"] = run.states[k].p;
        p["q"] = run.states[k].q;
        p["detected_cum"] = run.states[k].detected_cum;
        p["prob_none_remaining"] = run.prob_none_remaining[k];
        phases.push_back(std::move(p));
    }
    o["phases"] = std::move(phases);
    o["delta"] = delta;
    o["verdict"] = run.stopping_phase ? "stop" : "continue";
    o["stopping_phase"] = run.stopping_phase ? Json(*run.stopping_phase) : Json(nullptr);
    return o;
}

inline Json compare_report(const ComparisonReport& rep, std::uint64_t seed, const Json& config) {
    auto o = report_header("compare", seed, config);
    o["trials"] = rep.trials;
    o["completed"] = rep.completed;
    o["skipped_baseline"] = rep.skipped_baseline;
    o["skipped_model"] = rep.skipped_model;
    o["win_fraction"] = rep.win_fraction;
    o["relative_mse_size_biased"] = rep.relative_mse_size_biased;
    o["relative_mse_baseline"] = rep.relative_mse_baseline;
    Json bf;
    bf["estimator"] = "harmonic mean over posterior draws (approximate)";
    bf["median_log_bayes_factor"] = finite_or_null(rep.median_log_bayes_factor);
    bf["mean_log_bayes_factor"] = finite_or_null(rep.mean_log_bayes_factor);
    bf["fraction_favoring_size_biased"] = rep.fraction_bayes_factor_favoring;
    o["bayes_factor_summary"] = std::move(bf);
    auto trials = Json::array();
    for (const auto& t : rep.outcomes) {
        Json tj;
        tj["trial"] = t.trial;
        tj["completed"] = t.completed;
        tj["truth"] = t.truth;
        tj["prediction_size_biased"] = t.prediction_size_biased;
        tj["prediction_baseline"] = t.prediction_baseline;
        tj["log_bayes_factor"] = finite_or_null(t.log_bayes_factor);
        if (!t.completed) tj["skipped_reason"] = t.skipped_reason;
        trials.push_back(std::move(tj));
    }
    o["outcomes"] = std::move(trials);
    return o;
}

}  // namespace sbrel
