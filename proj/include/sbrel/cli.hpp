#pragma once

// Command-line front end: ingest | fit | predict | decide | baseline | compare | simulate.
// Exit codes: 0 success, 1 validation/usage error, 2 model or I/O error.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sbrel/baseline.hpp"
#include "sbrel/config.hpp"
#include "sbrel/ingest.hpp"
#include "sbrel/model.hpp"
#include "sbrel/predictor.hpp"
#include "sbrel/report.hpp"
#include "sbrel/sampler.hpp"
#include "sbrel/simulator.hpp"

namespace sbrel::cli {

// Unwritable output paths and similar runtime failures; exit code 2.
class IoError : public Error {
public:
    using Error::Error;
};

struct GlobalOptions {
    std::uint64_t seed = 0;
    std::string config_path;
    std::string out_path;
    std::string format = "doc";
    bool quiet = false;
    unsigned threads = 0;
};

namespace detail {

inline std::vector<std::int64_t> parse_int_list(const std::string& text, const char* flag) {
    std::vector<std::int64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto v = sbrel::detail::parse_int(item);
        if (!v) throw ValidationError(std::string(flag) + ": '" + item + "' is not an integer");
        out.push_back(*v);
    }
    if (out.empty()) throw ValidationError(std::string(flag) + " needs at least one value");
    return out;
}

inline std::vector<double> parse_real_list(const std::string& text, const char* flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::istringstream is(std::string(sbrel::detail::trim(item)));
        is.imbue(std::locale::classic());
        double v = 0.0;
        if (!(is >> v) || !is.eof()) throw ValidationError(std::string(flag) + ": '" + item + "' is not a number");
        out.push_back(v);
    }
    if (out.empty()) throw ValidationError(std::string(flag) + " needs at least one value");
    return out;
}

inline std::string read_input(const std::string& path, std::istream& stdin_stream) {
    std::ostringstream ss;
    if (path == "-") {
        ss << stdin_stream.rdbuf();
    } else {
        std::ifstream in(path);
        if (!in) throw ValidationError("cannot open '" + path + "'");
        ss << in.rdbuf();
    }
    return ss.str();
}

inline void write_output(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write '" + path + "'");
    f << text;
    if (!f) throw IoError("failed writing '" + path + "'");
}

inline std::string render(const Json& doc) { return doc.dump(2) + "\n"; }

// runs_per_phase from a JSON document (key runs_per_phase, or a bare array) or a
// delimited table with columns phase,runs.
inline std::vector<std::int64_t> load_runs_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("--runs-file: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    const auto text = ss.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && (text[first] == '{' || text[first] == '[')) {
        try {
            const auto doc = Json::parse(text);
            const auto& arr = doc.is_object() ? doc.at("runs_per_phase") : doc;
            return arr.get<std::vector<std::int64_t>>();
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("--runs-file: expected runs_per_phase in '" + path + "': " + e.what());
        }
    }
    std::istringstream lines(text);
    std::string line;
    std::getline(lines, line);
    const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
    const auto header = sbrel::detail::split(line, delim);
    std::optional<std::size_t> c_phase;
    std::optional<std::size_t> c_runs;
    for (std::size_t k = 0; k < header.size(); ++k) {
        const auto name = sbrel::detail::normalize_column(header[k]);
        if (name == "phase" || name == "cycle") c_phase = k;
        if (name == "runs") c_runs = k;
    }
    if (!c_phase) throw SchemaError("phase");
    if (!c_runs) throw SchemaError("runs");
    std::map<std::int64_t, std::int64_t> by_phase;
    std::size_t line_no = 1;
    while (std::getline(lines, line)) {
        ++line_no;
        if (sbrel::detail::trim(line).empty()) continue;
        const auto cells = sbrel::detail::split(line, delim);
        const auto ph = cells.size() > *c_phase ? sbrel::detail::parse_int(cells[*c_phase]) : std::nullopt;
        const auto rn = cells.size() > *c_runs ? sbrel::detail::parse_int(cells[*c_runs]) : std::nullopt;
        if (!ph || !rn) throw RowError(line_no, "phase and runs must be integers");
        by_phase[*ph] += *rn;
    }
    std::vector<std::int64_t> runs;
    std::int64_t expected = 1;
    for (const auto& [ph, rn] : by_phase) {
        if (ph != expected) throw ValidationError("--runs-file: phases must be 1..m without gaps");
        runs.push_back(rn);
        ++expected;
    }
    return runs;
}

struct DataOptions {
    std::string data_path;
    std::string summary_path;
    std::string runs;
    std::string runs_file;
    std::string delimiter = "auto";
};

inline void add_data_options(CLI::App* sub, DataOptions& o) {
    sub->add_option("--data", o.data_path, "Testing log (delimited text, '-' for stdin)");
    sub->add_option("--runs", o.runs, "Runs per phase, comma separated (phase increments)");
    sub->add_option("--runs-file", o.runs_file, "Runs per phase: JSON with runs_per_phase, or a phase,runs table");
    sub->add_option("--delimiter", o.delimiter, "Log delimiter")->check(CLI::IsMember({"auto", "comma", "tab"}));
}

inline std::vector<PhaseSummary> load_phases(const DataOptions& o, const Json& config, std::istream& in,
                                             const char* stage) {
    if (!o.summary_path.empty()) return phases_from_json(load_json_file(o.summary_path));
    if (o.data_path.empty()) throw ValidationError(std::string(stage) + ": --data is required");

    LogFormat fmt;
    if (o.delimiter == "comma") fmt.delimiter = ',';
    if (o.delimiter == "tab") fmt.delimiter = '\t';
    std::istringstream text(read_input(o.data_path, in));
    const auto parsed = parse_test_log(text, fmt);

    std::vector<std::int64_t> runs;
    if (!o.runs.empty()) {
        runs = parse_int_list(o.runs, "--runs");
    } else if (!o.runs_file.empty()) {
        runs = load_runs_file(o.runs_file);
    } else if (config.is_object() && config.contains("runs_per_phase")) {
        runs = config.at("runs_per_phase").get<std::vector<std::int64_t>>();
    } else if (parsed.non_defect_rows > 0) {
        // full per-input log: every row is one run
        runs = runs_from_row_counts(parsed);
    } else {
        throw ValidationError(std::string(stage) + ": runs per phase are required (--runs or --runs-file)");
    }
    return summarize_phases(parsed.records, runs);
}

inline std::vector<double> load_draw_samples(const std::string& path, std::size_t max_samples) {
    std::ifstream in(path);
    if (!in) throw ValidationError("--draws: cannot open '" + path + "'");
    std::string line;
    std::getline(in, line);
    const auto header = sbrel::detail::split(line, ',');
    const auto it = std::find(header.begin(), header.end(), std::string_view("F"));
    if (it == header.end()) throw SchemaError("F");
    const auto col = static_cast<std::size_t>(it - header.begin());
    std::vector<double> all;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (sbrel::detail::trim(line).empty()) continue;
        const auto cells = sbrel::detail::split(line, ',');
        const auto v = cells.size() > col ? sbrel::detail::parse_int(cells[col]) : std::nullopt;
        if (!v) throw RowError(line_no, "F must be an integer");
        all.push_back(static_cast<double>(*v));
    }
    if (all.size() <= max_samples) return all;
    std::vector<double> out;
    const std::size_t stride = (all.size() + max_samples - 1) / max_samples;
    for (std::size_t k = 0; k < all.size(); k += stride) out.push_back(all[k]);
    return out;
}

// Totals from a fit report (F_mean per phase) or a predict report (totals + prediction).
inline std::vector<double> totals_from_report(const Json& doc, bool include_prediction) {
    try {
        const auto kind = doc.value("report", std::string());
        if (kind == "fit") {
            std::vector<double> totals;
            for (const auto& row : parse_fit_phases(doc)) totals.push_back(row.F_mean);
            return totals;
        }
        if (kind == "predict" || kind == "decide") {
            auto totals = doc.at("totals").get<std::vector<double>>();
            if (include_prediction && kind == "predict") totals.push_back(doc.at("predicted_next_total").get<double>());
            return totals;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed report: ") + e.what());
    }
    throw ValidationError("--from-report expects a fit or predict report");
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr,
               std::istream& in = std::cin) {
    CLI::App app{"Optimal stopping of software testing with size-biased bug models"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--seed", g.seed, "Seed for every random draw");
    app.add_option("--config", g.config_path, "JSON configuration document");
    app.add_option("--out", g.out_path, "Output path (default stdout)");
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"doc", "table"}));
    app.add_flag("--quiet", g.quiet, "Suppress warnings");
    app.add_option("--threads", g.threads, "Worker threads for chains and trials (0 = all cores)");

    // ingest
    detail::DataOptions ingest_opts;
    auto* ingest = app.add_subcommand("ingest", "Parse a testing log into per-phase summaries");
    detail::add_data_options(ingest, ingest_opts);

    // fit
    detail::DataOptions fit_opts;
    std::optional<std::int64_t> chains, iterations, burn_in, thin;
    std::string draws_out;
    auto* fit = app.add_subcommand("fit", "Fit the size-biased model by MCMC");
    detail::add_data_options(fit, fit_opts);
    fit->add_option("--summary", fit_opts.summary_path, "Phase summary document from `ingest`");
    fit->add_option("--chains", chains);
    fit->add_option("--iterations", iterations);
    fit->add_option("--burn-in", burn_in);
    fit->add_option("--thin", thin);
    fit->add_option("--draws-out", draws_out, "Write raw F draws as iteration,chain,phase,F");

    // predict
    std::string predict_report_path, predict_totals, predict_draws;
    std::optional<double> predict_epsilon, bandwidth, temporal_rate;
    auto* predict = app.add_subcommand("predict", "Predict the next phase total by temporally weighted KDE");
    predict->add_option("--from-report", predict_report_path, "Fit report");
    predict->add_option("--totals", predict_totals, "Phase totals, comma separated");
    predict->add_option("--draws", predict_draws, "Draw table from `fit --draws-out` for bandwidth selection");
    predict->add_option("--bandwidth", bandwidth);
    predict->add_option("--temporal-rate", temporal_rate);
    predict->add_option("--epsilon", predict_epsilon, "Stopping threshold")->required();

    // decide
    std::string decide_report_path, decide_totals;
    std::optional<double> decide_epsilon;
    auto* decide = app.add_subcommand("decide", "Apply the epsilon stopping rule to phase totals");
    decide->add_option("--totals", decide_totals, "Phase totals, comma separated");
    decide->add_option("--from-report", decide_report_path, "Fit or predict report");
    decide->add_option("--epsilon", decide_epsilon, "Stopping threshold")->required();

    // baseline
    std::string detections_path;
    std::optional<std::int64_t> n_total;
    std::optional<double> p0, delta;
    auto* baseline = app.add_subcommand("baseline", "Multiple-fault-class Bayesian baseline");
    baseline->add_option("--detections", detections_path, "Table with columns phase,class,count")->required();
    baseline->add_option("--n-total", n_total);
    baseline->add_option("--p0", p0);
    baseline->add_option("--delta", delta);

    // compare
    std::int64_t trials = 200;
    std::string compare_scenario;
    auto* compare = app.add_subcommand("compare", "Score both models on simulated data");
    compare->add_option("--trials", trials);
    compare->add_option("--scenario", compare_scenario, "Scenario / comparison config document");

    // simulate
    std::string sim_scenario, truth_out;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic testing log with ground truth");
    simulate->add_option("--scenario", sim_scenario, "Scenario config document");
    simulate->add_option("--truth-out", truth_out, "Ground-truth document path");

    try {
        std::vector<std::string> args;
        for (int k = argc - 1; k > 0; --k) args.emplace_back(argv[k]);
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    const auto format = g.format == "table" ? OutputFormat::table : OutputFormat::document;
    try {
        const Json file_config = g.config_path.empty() ? Json::object() : load_json_file(g.config_path);

        if (ingest->parsed()) {
            const auto phases = detail::load_phases(ingest_opts, file_config, in, "ingest");
            Json cfg;
            cfg["data"] = ingest_opts.data_path;
            cfg["delimiter"] = ingest_opts.delimiter;
            cfg["runs"] = ingest_opts.runs;
            cfg["runs_file"] = ingest_opts.runs_file;
            if (format == OutputFormat::table) {
                std::ostringstream os;
                ingest_table(os, phases);
                detail::write_output(g.out_path, os.str(), out);
            } else {
                detail::write_output(g.out_path, detail::render(ingest_report(phases, g.seed, cfg)), out);
            }
            return 0;
        }

        if (fit->parsed()) {
            const auto phases = detail::load_phases(fit_opts, file_config, in, "fit");
            auto hyper_cfg = parse_hyper_config(file_config);
            if (!has_hyper_seed(file_config)) hyper_cfg.hyper_seed = derive_seed(g.seed, 0x68797065ULL);
            auto sampler = parse_sampler_config(file_config);
            if (chains) sampler.chains = *chains;
            if (iterations) sampler.iterations = *iterations;
            if (burn_in) sampler.burn_in = *burn_in;
            if (thin) sampler.thin = *thin;
            sampler.seed = g.seed;
            sampler.threads = g.threads;
            sampler.validate();

            const auto hyper = build_hyperparams(phases, hyper_cfg);
            const auto post = run_chain(phases, hyper, sampler);

            Json cfg;
            cfg["hyper"] = to_json(hyper_cfg);
            cfg["sampler"] = to_json(sampler);
            cfg["data"] = fit_opts.summary_path.empty() ? fit_opts.data_path : fit_opts.summary_path;
            const auto report = fit_report(phases, post, sampler, g.seed, cfg);
            if (!g.quiet) {
                for (const auto& w : post.warnings) err << "warning: " << w << '\n';
            }
            if (!draws_out.empty()) {
                std::ostringstream os;
                write_draws(os, post, sampler);
                detail::write_output(draws_out, os.str(), out);
            }
            if (format == OutputFormat::table) {
                std::ostringstream os;
                fit_table(os, report);
                detail::write_output(g.out_path, os.str(), out);
            } else {
                detail::write_output(g.out_path, detail::render(report), out);
            }
            return 0;
        }

        if (predict->parsed()) {
            std::vector<double> totals;
            if (!predict_totals.empty()) {
                totals = detail::parse_real_list(predict_totals, "--totals");
            } else if (!predict_report_path.empty()) {
                totals = detail::totals_from_report(load_json_file(predict_report_path), false);
            } else {
                throw ValidationError("predict: --totals or --from-report is required");
            }
            auto kde = parse_kde_config(file_config);
            if (bandwidth) kde.bandwidth = *bandwidth;
            if (temporal_rate) kde.temporal_rate = *temporal_rate;
            kde.validate();
            if (!(*predict_epsilon > 0.0)) throw ValidationError("--epsilon must be positive");

            auto events = events_from_totals(totals);
            if (const auto windows = parse_windows(file_config)) {
                if (windows->size() != events.size()) throw ConfigurationError("kde.windows needs one window per phase");
                for (std::size_t k = 0; k < events.size(); ++k) {
                    events[k].window_start = (*windows)[k].first;
                    events[k].window_end = (*windows)[k].second;
                }
            }
            std::vector<double> cv;
            if (!predict_draws.empty()) cv = detail::load_draw_samples(predict_draws, 2000);
            const auto pred = predict_next_total(events, kde, cv);
            auto all = totals;
            all.push_back(pred.predicted_next_total);
            const auto decision = decide_stop(all, *predict_epsilon);

            Json cfg;
            cfg["kde"] = to_json(kde);
            cfg["cv_source"] = predict_draws.empty() ? "event totals" : "posterior draws";
            cfg["source"] = predict_totals.empty() ? predict_report_path : "--totals";
            const auto report = predict_report(totals, pred, *predict_epsilon, decision, g.seed, cfg);
            if (format == OutputFormat::table) {
                std::ostringstream os;
                os << "key,value\n";
                os << "predicted_next_total," << table_number(pred.predicted_next_total) << '\n';
                os << "h_selected," << table_number(pred.bandwidth) << '\n';
                os << "epsilon," << table_number(*predict_epsilon) << '\n';
                os << "stop_after_phase,"
                   << (decision.stop_after_phase ? std::to_string(*decision.stop_after_phase) : std::string()) << '\n';
                detail::write_output(g.out_path, os.str(), out);
            } else {
                detail::write_output(g.out_path, detail::render(report), out);
            }
            return 0;
        }

        if (decide->parsed()) {
            std::vector<double> totals;
            if (!decide_totals.empty()) {
                totals = detail::parse_real_list(decide_totals, "--totals");
            } else if (!decide_report_path.empty()) {
                totals = detail::totals_from_report(load_json_file(decide_report_path), true);
            } else {
                throw ValidationError("decide: --totals or --from-report is required");
            }
            const auto decision = decide_stop(totals, *decide_epsilon);
            Json cfg;
            cfg["source"] = decide_totals.empty() ? decide_report_path : "--totals";
            if (format == OutputFormat::table) {
                std::ostringstream os;
                os << "stop_after_phase\n"
                   << (decision.stop_after_phase ? std::to_string(*decision.stop_after_phase) : std::string("continue"))
                   << '\n';
                detail::write_output(g.out_path, os.str(), out);
            } else {
                detail::write_output(g.out_path, detail::render(decide_report(totals, *decide_epsilon, decision, g.seed, cfg)),
                                     out);
            }
            return 0;
        }

        if (baseline->parsed()) {
            const Json& bcfg = file_config.contains("baseline") ? file_config.at("baseline") : Json::object();
            const auto table = detail::read_input(detections_path, in);
            // phase,class,count rows -> per-phase count vectors
            std::istringstream lines(table);
            std::string line;
            std::getline(lines, line);
            const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
            const auto header = sbrel::detail::split(line, delim);
            std::map<std::string, std::size_t> col;
            for (std::size_t k = 0; k < header.size(); ++k) col[sbrel::detail::normalize_column(header[k])] = k;
            for (const char* req : {"phase", "class", "count"}) {
                if (!col.contains(req)) throw SchemaError(req);
            }
            std::map<std::int64_t, std::map<std::int64_t, std::int64_t>> counts;
            std::size_t line_no = 1;
            while (std::getline(lines, line)) {
                ++line_no;
                if (sbrel::detail::trim(line).empty()) continue;
                const auto cells = sbrel::detail::split(line, delim);
                const auto cell = [&](const char* k) {
                    const auto c = col.at(k);
                    return c < cells.size() ? sbrel::detail::parse_int(cells[c]) : std::nullopt;
                };
                const auto ph = cell("phase");
                const auto cl = cell("class");
                const auto ct = cell("count");
                if (!ph || !cl || !ct || *ph < 1 || *cl < 1 || *ct < 0) {
                    throw RowError(line_no, "phase, class must be positive and count non-negative integers");
                }
                counts[*ph][*cl] += *ct;
            }
            std::vector<std::vector<double>> q;
            if (bcfg.contains("q")) q = bcfg.at("q").get<std::vector<std::vector<double>>>();
            const auto phases = counts.empty() ? 0 : counts.rbegin()->first;
            if (static_cast<std::int64_t>(q.size()) != phases) {
                throw ConfigurationError("baseline.q must list detection probabilities for each of the " +
                                         std::to_string(phases) + " phases");
            }
            std::vector<PhaseDetection> detections;
            std::int64_t detected = 0;
            for (std::int64_t j = 1; j <= phases; ++j) {
                PhaseDetection d;
                d.q_detect = q[static_cast<std::size_t>(j - 1)];
                d.counts.assign(d.q_detect.size(), 0);
                if (const auto it = counts.find(j); it != counts.end()) {
                    for (const auto& [cl, ct] : it->second) {
                        if (cl > static_cast<std::int64_t>(d.counts.size())) {
                            throw ConfigurationError("phase " + std::to_string(j) + " has class " + std::to_string(cl) +
                                                     " but baseline.q lists fewer classes");
                        }
                        d.counts[static_cast<std::size_t>(cl - 1)] = ct;
                    }
                }
                d.q_none = 1.0 - d.detect_sum();
                detected += d.detected();
                detections.push_back(std::move(d));
            }
            const auto nt = n_total.value_or(bcfg.value("n_total", detected));
            const auto prior = p0.value_or(bcfg.value("p0", 0.5));
            const auto dl = delta.value_or(bcfg.value("delta", 0.05));
            const auto run = baseline_stopping_phase(detections, nt, prior, dl);
            Json cfg;
            cfg["n_total"] = nt;
            cfg["p0"] = prior;
            cfg["delta"] = dl;
            cfg["q"] = q;
            const auto report = baseline_report(run, dl, g.seed, cfg);
            if (format == OutputFormat::table) {
                std::ostringstream os;
                os << "phase,prob_none_remaining\n";
                for (std::size_t k = 0; k < run.states.size(); ++k) {
                    os << run.states[k].phase << ',' << table_number(run.prob_none_remaining[k]) << '\n';
                }
                detail::write_output(g.out_path, os.str(), out);
            } else {
                detail::write_output(g.out_path, detail::render(report), out);
            }
            return 0;
        }

        if (compare->parsed()) {
            const Json doc = compare_scenario.empty() ? file_config : load_json_file(compare_scenario);
            auto cfg = parse_compare_config(doc);
            cfg.threads = g.threads;
            const auto rep = compare_models(cfg, trials, g.seed);
            auto echo = to_json(cfg);
            echo["trials"] = trials;
            const auto report = compare_report(rep, g.seed, echo);
            if (format == OutputFormat::table) {
                std::ostringstream os;
                os << "trial,completed,truth,prediction_size_biased,prediction_baseline,log_bayes_factor\n";
                for (const auto& t : rep.outcomes) {
                    os << t.trial << ',' << (t.completed ? 1 : 0) << ',' << table_number(t.truth) << ','
                       << table_number(t.prediction_size_biased) << ',' << table_number(t.prediction_baseline) << ','
                       << table_number(t.log_bayes_factor) << '\n';
                }
                detail::write_output(g.out_path, os.str(), out);
            } else {
                detail::write_output(g.out_path, detail::render(report), out);
            }
            return 0;
        }

        if (simulate->parsed()) {
            const Json doc = sim_scenario.empty() ? (file_config.contains("scenario") ? file_config : Json::object())
                                                  : load_json_file(sim_scenario);
            auto scenario = parse_scenario_config(doc);
            const bool seed_given = app.get_option("--seed")->count() > 0;
            if (seed_given || !(doc.contains("seed") || (doc.contains("scenario") && doc.at("scenario").contains("seed")))) {
                scenario.seed = g.seed;
            }
            const auto sim = generate(scenario);
            std::ostringstream log;
            write_test_log(log, sim.records);
            if (!truth_out.empty()) {
                auto truth = report_header("simulate", scenario.seed, to_json(scenario));
                truth["truth"] = truth_to_json(sim.truth);
                truth["runs_per_phase"] = sim.truth.runs_per_phase;
                detail::write_output(truth_out, detail::render(truth), out);
            }
            detail::write_output(g.out_path, log.str(), out);
            return 0;
        }
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    err << app.help();
    return 1;
}

}  // namespace sbrel::cli
