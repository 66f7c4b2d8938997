#pragma once

// JSON configuration documents: parsing into the module config structs and
// echoing the effective values back into reports.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbrel/baseline.hpp"
#include "sbrel/error.hpp"
#include "sbrel/model.hpp"
#include "sbrel/predictor.hpp"
#include "sbrel/sampler.hpp"
#include "sbrel/simulator.hpp"

namespace sbrel {

using Json = nlohmann::ordered_json;

inline Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
    }
}

// FNV-1a over the compact dump; stable because ordered_json keeps insertion order.
inline std::string config_hash(const Json& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : config.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace detail {

template <class T>
T get_or(const Json& doc, const char* key, T fallback) {
    if (!doc.is_object() || !doc.contains(key) || doc.at(key).is_null()) return fallback;
    try {
        return doc.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigurationError(std::string("config key '") + key + "' has the wrong type");
    }
}

inline const Json& section(const Json& doc, const char* name) {
    static const Json empty = Json::object();
    if (doc.is_object() && doc.contains(name)) {
        if (!doc.at(name).is_object()) throw ConfigurationError(std::string("config section '") + name + "' must be an object");
        return doc.at(name);
    }
    return empty;
}

template <class T>
Broadcast<T> get_broadcast(const Json& doc, const char* key, bool scalar_is_array = false) {
    Broadcast<T> out;
    if (!doc.is_object() || !doc.contains(key)) return out;
    const auto& v = doc.at(key);
    try {
        // a scalar broadcasts; a nested array is a [phase][bug] matrix
        const bool is_matrix = scalar_is_array ? (v.is_array() && !v.empty() && v.front().is_array() &&
                                                  !v.front().empty() && v.front().front().is_array())
                                               : v.is_array();
        if (is_matrix) {
            out.matrix = v.get<Ragged<T>>();
        } else {
            out.scalar = v.get<T>();
        }
    } catch (const nlohmann::json::exception&) {
        throw ConfigurationError(std::string("config key '") + key + "' has the wrong shape");
    }
    return out;
}

inline std::optional<std::vector<double>> get_vector_or_scalar(const Json& doc, const char* key) {
    if (!doc.is_object() || !doc.contains(key)) return std::nullopt;
    const auto& v = doc.at(key);
    try {
        if (v.is_array()) return v.get<std::vector<double>>();
        return std::vector<double>{v.get<double>()};
    } catch (const nlohmann::json::exception&) {
        throw ConfigurationError(std::string("config key '") + key + "' must be a number or an array of numbers");
    }
}

template <class T>
Json broadcast_to_json(const Broadcast<T>& b) {
    if (b.matrix) return Json(*b.matrix);
    if (b.scalar) return Json(*b.scalar);
    return nullptr;
}

}  // namespace detail

// Hyperparameter keys may sit at the top level or under "hyper".
inline HyperConfig parse_hyper_config(const Json& doc) {
    const Json& h = doc.is_object() && doc.contains("hyper") ? detail::section(doc, "hyper") : doc;
    HyperConfig c;
    if (h.is_object() && h.contains("du_bound")) c.du_bound = detail::get_or<std::int64_t>(h, "du_bound", 1);
    c.proposal_rate = detail::get_broadcast<double>(h, "proposal_rate");
    c.a = detail::get_broadcast<double>(h, "a");
    c.b = detail::get_broadcast<double>(h, "b");
    c.m_weights = detail::get_broadcast<std::vector<std::int64_t>>(h, "m_weights", true);
    c.mu = detail::get_vector_or_scalar(h, "mu");
    c.sigma2 = detail::get_vector_or_scalar(h, "sigma2");
    c.hyper_seed = detail::get_or<std::uint64_t>(h, "hyper_seed", 0);
    return c;
}

inline bool has_hyper_seed(const Json& doc) {
    const Json& h = doc.is_object() && doc.contains("hyper") ? detail::section(doc, "hyper") : doc;
    return h.is_object() && h.contains("hyper_seed");
}

inline Json to_json(const HyperConfig& c) {
    Json o;
    o["du_bound"] = c.du_bound ? Json(*c.du_bound) : Json(nullptr);
    o["proposal_rate"] = detail::broadcast_to_json(c.proposal_rate);
    o["a"] = detail::broadcast_to_json(c.a);
    o["b"] = detail::broadcast_to_json(c.b);
    o["m_weights"] = detail::broadcast_to_json(c.m_weights);
    o["mu"] = c.mu ? Json(*c.mu) : Json(nullptr);
    o["sigma2"] = c.sigma2 ? Json(*c.sigma2) : Json(nullptr);
    o["hyper_seed"] = c.hyper_seed;
    return o;
}

inline SamplerConfig parse_sampler_config(const Json& doc, SamplerConfig c = {}) {
    const Json& s = detail::section(doc, "sampler");
    c.chains = detail::get_or(s, "chains", c.chains);
    c.iterations = detail::get_or(s, "iterations", c.iterations);
    c.burn_in = detail::get_or(s, "burn_in", c.burn_in);
    c.thin = detail::get_or(s, "thin", c.thin);
    c.epsilon_floor = detail::get_or(s, "epsilon_floor", c.epsilon_floor);
    c.max_init_attempts = detail::get_or(s, "max_init_attempts", c.max_init_attempts);
    return c;
}

inline Json to_json(const SamplerConfig& c) {
    Json o;
    o["chains"] = c.chains;
    o["iterations"] = c.iterations;
    o["burn_in"] = c.burn_in;
    o["thin"] = c.thin;
    o["seed"] = c.seed;
    o["epsilon_floor"] = c.epsilon_floor;
    o["max_init_attempts"] = c.max_init_attempts;
    return o;
}

inline KdeConfig parse_kde_config(const Json& doc, KdeConfig c = {}) {
    const Json& k = detail::section(doc, "kde");
    if (k.contains("bandwidth")) {
        const auto& bw = k.at("bandwidth");
        if (bw.is_string()) {
            if (bw.get<std::string>() != "auto") throw ConfigurationError("bandwidth must be a number or \"auto\"");
            c.bandwidth.reset();
        } else if (bw.is_number()) {
            c.bandwidth = bw.get<double>();
        } else {
            throw ConfigurationError("bandwidth must be a number or \"auto\"");
        }
    }
    c.temporal_rate = detail::get_or(k, "temporal_rate", c.temporal_rate);
    c.cv_grid = detail::get_or(k, "cv_grid", c.cv_grid);
    c.integration_points = detail::get_or(k, "integration_points", c.integration_points);
    return c;
}

// Optional explicit event windows [[v_1, eta_1], ...] under kde.windows.
inline std::optional<std::vector<std::pair<double, double>>> parse_windows(const Json& doc) {
    const Json& k = detail::section(doc, "kde");
    if (!k.contains("windows")) return std::nullopt;
    try {
        return k.at("windows").get<std::vector<std::pair<double, double>>>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigurationError("kde.windows must be a list of [start, end] pairs");
    }
}

inline Json to_json(const KdeConfig& c) {
    Json o;
    o["bandwidth"] = c.bandwidth ? Json(*c.bandwidth) : Json("auto");
    o["temporal_rate"] = c.temporal_rate;
    o["cv_grid"] = c.cv_grid;
    o["integration_points"] = c.integration_points;
    return o;
}

// Scenario keys sit at the top level of a scenario document or under "scenario".
inline ScenarioConfig parse_scenario_config(const Json& doc) {
    const Json& s = doc.is_object() && doc.contains("scenario") ? detail::section(doc, "scenario") : doc;
    ScenarioConfig c;
    c.phases = detail::get_or(s, "phases", c.phases);
    if (s.contains("bugs_per_phase")) {
        c.bugs_per_phase = detail::get_or(s, "bugs_per_phase", c.bugs_per_phase);
    } else if (c.phases != static_cast<std::int64_t>(c.bugs_per_phase.size())) {
        throw ConfigurationError("bugs_per_phase is required when phases differs from the default");
    }
    if (s.contains("n_trials_range")) {
        const auto r = detail::get_or<std::vector<std::int64_t>>(s, "n_trials_range", {});
        if (r.size() != 2) throw ConfigurationError("n_trials_range must be [min, max]");
        c.n_trials_min = r[0];
        c.n_trials_max = r[1];
    }
    if (s.contains("t_range")) {
        const auto r = detail::get_or<std::vector<double>>(s, "t_range", {});
        if (r.size() != 2) throw ConfigurationError("t_range must be [min, max]");
        c.t_min = r[0];
        c.t_max = r[1];
    }
    if (s.contains("p_true")) {
        const auto& p = s.at("p_true");
        c.p_true = p.is_array() ? detail::get_or(s, "p_true", c.p_true)
                                : std::vector<double>(static_cast<std::size_t>(c.phases), detail::get_or(s, "p_true", 0.5));
    } else {
        c.p_true.assign(static_cast<std::size_t>(std::max<std::int64_t>(c.phases, 0)), 0.5);
    }
    c.seed = detail::get_or(s, "seed", c.seed);
    c.exposure_scale = detail::get_or(s, "exposure_scale", c.exposure_scale);
    c.max_retries = detail::get_or(s, "max_retries", c.max_retries);
    c.validate();
    return c;
}

inline Json to_json(const ScenarioConfig& c) {
    Json o;
    o["phases"] = c.phases;
    o["bugs_per_phase"] = c.bugs_per_phase;
    o["n_trials_range"] = {c.n_trials_min, c.n_trials_max};
    o["t_range"] = {c.t_min, c.t_max};
    o["p_true"] = c.p_true;
    o["seed"] = c.seed;
    o["exposure_scale"] = c.exposure_scale;
    o["max_retries"] = c.max_retries;
    return o;
}

inline CompareConfig parse_compare_config(const Json& doc) {
    CompareConfig c;
    c.scenario = parse_scenario_config(doc);
    c.sampler = parse_sampler_config(doc, c.sampler);
    c.kde = parse_kde_config(doc, c.kde);
    if (doc.is_object() && doc.contains("prior")) c.prior = parse_hyper_config(doc.at("prior"));
    const Json& cmp = detail::section(doc, "compare");
    c.baseline_p0 = detail::get_or(cmp, "baseline_p0", c.baseline_p0);
    c.baseline_q = detail::get_or(cmp, "baseline_q", c.baseline_q);
    c.max_cv_samples = detail::get_or(cmp, "max_cv_samples", c.max_cv_samples);
    return c;
}

inline Json to_json(const CompareConfig& c) {
    Json o;
    o["scenario"] = to_json(c.scenario);
    o["sampler"] = to_json(c.sampler);
    o["prior"] = to_json(c.prior);
    o["kde"] = to_json(c.kde);
    o["compare"] = {{"baseline_p0", c.baseline_p0}, {"baseline_q", c.baseline_q}, {"max_cv_samples", c.max_cv_samples}};
    return o;
}

}  // namespace sbrel
