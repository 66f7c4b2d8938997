#pragma once

// Temporally weighted Gaussian KDE over past phase totals, used to predict the
// next phase's total eventual size, and the epsilon stopping rule.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "sbrel/error.hpp"

namespace sbrel {

struct PhaseEvent {
    std::int64_t phase = 1;
    double total_size = 0.0;
    double window_start = 0.0;  // v_j
    double window_end = 1.0;    // eta_j
};

struct KdeConfig {
    std::optional<double> bandwidth;  // nullopt = cross-validated
    double temporal_rate = 1.0;       // rate of the exponential temporal kernel, per phase-index unit
    std::vector<double> cv_grid;      // empty = geometric grid around the normal reference bandwidth
    int integration_points = 2001;    // grid resolution for the mode search

    void validate() const {
        if (bandwidth && !(*bandwidth > 0.0)) throw ValidationError("bandwidth must be positive");
        if (!(temporal_rate > 0.0)) throw ValidationError("temporal_rate must be positive");
        for (double h : cv_grid) {
            if (!(h > 0.0)) throw ValidationError("cv_grid entries must be positive");
        }
        if (integration_points < 3) throw ValidationError("integration_points must be at least 3");
    }
};

// Phase j occupies the window [j - 1, j].
inline std::vector<PhaseEvent> events_from_totals(std::span<const double> totals) {
    std::vector<PhaseEvent> out;
    for (std::size_t k = 0; k < totals.size(); ++k) {
        const auto j = static_cast<std::int64_t>(k + 1);
        out.push_back({j, totals[k], static_cast<double>(j - 1), static_cast<double>(j)});
    }
    return out;
}

// Normalized weights w_j(t) ∝ [G(t - v_j) - G(t - eta_j)] / (eta_j - v_j) with G the
// exponential CDF. Evaluated in log space so old events do not underflow.
inline std::vector<double> temporal_weights(double t, std::span<const PhaseEvent> events, double rate) {
    if (events.empty()) throw InsufficientDataError("temporal weights need at least one event");
    if (!(rate > 0.0)) throw DomainError("temporal rate must be positive");
    std::vector<double> logw;
    for (const auto& e : events) {
        const double width = e.window_end - e.window_start;
        if (!(width > 0.0)) throw DomainError("event window must satisfy v_j < eta_j");
        if (t < e.window_end) throw TemporalOrderError("prediction time precedes the end of an event window");
        // e^{-rate(t - eta)} - e^{-rate(t - v)} = e^{-rate(t - eta)} (1 - e^{-rate * width})
        logw.push_back(-rate * (t - e.window_end) + std::log(-std::expm1(-rate * width)) - std::log(width));
    }
    const double top = *std::max_element(logw.begin(), logw.end());
    double total = 0.0;
    for (auto& lw : logw) {
        lw = std::exp(lw - top);
        total += lw;
    }
    for (auto& w : logw) w /= total;
    return logw;
}

inline double gaussian_kernel(double u, double h) {
    return std::exp(-0.5 * (u / h) * (u / h)) / (h * std::sqrt(2.0 * std::numbers::pi));
}

inline double kde_density(double s, std::span<const PhaseEvent> events, std::span<const double> weights, double h) {
    if (!(h > 0.0)) throw DomainError("bandwidth must be positive");
    if (weights.size() != events.size()) throw DomainError("one weight per event is required");
    double f = 0.0;
    for (std::size_t k = 0; k < events.size(); ++k) f += weights[k] * gaussian_kernel(s - events[k].total_size, h);
    return f;
}

// Least-squares cross-validation score: ∫ f_h^2 - (2/n) Σ f_{h,-i}(X_i). The
// first term is closed form because two Gaussians of scale h convolve to scale h√2.
inline double cv_score(std::span<const double> samples, double h) {
    if (samples.size() < 2) throw InsufficientDataError("bandwidth selection needs at least 2 samples");
    if (!(h > 0.0)) throw DomainError("bandwidth must be positive");
    const double n = static_cast<double>(samples.size());
    const double h2 = h * std::numbers::sqrt2;
    double sq = 0.0;
    double loo = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        sq += gaussian_kernel(0.0, h2);
        for (std::size_t k = i + 1; k < samples.size(); ++k) {
            const double d = samples[i] - samples[k];
            sq += 2.0 * gaussian_kernel(d, h2);
            loo += 2.0 * gaussian_kernel(d, h);
        }
    }
    // loo holds Σ_i Σ_{k≠i} K_h(X_i - X_k); each leave-one-out estimate divides by n - 1
    return sq / (n * n) - 2.0 / n * loo / (n - 1.0);
}

inline std::vector<double> default_cv_grid(std::span<const double> samples) {
    const double n = static_cast<double>(samples.size());
    double mean = 0.0;
    for (double x : samples) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : samples) var += (x - mean) * (x - mean);
    const double sd = n > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    double ref = 1.06 * sd * std::pow(n, -0.2);
    if (!(ref > 0.0)) ref = std::max(1.0, 0.01 * std::abs(mean));
    std::vector<double> grid;
    for (int k = -8; k <= 8; ++k) grid.push_back(ref * std::exp2(k / 4.0));
    return grid;
}

inline double select_bandwidth(std::span<const double> samples, std::span<const double> grid) {
    if (samples.size() < 2) throw InsufficientDataError("bandwidth selection needs at least 2 samples");
    if (grid.empty()) throw ValidationError("cv_grid must not be empty");
    double best_h = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (double h : grid) {
        const double score = cv_score(samples, h);
        if (score < best || (score == best && h < best_h)) {
            best = score;
            best_h = h;
        }
    }
    return best_h;
}

struct Prediction {
    double predicted_next_total = 0.0;  // mean of the density restricted to [0, S_t)
    double median = 0.0;
    double mode = 0.0;
    double bandwidth = 0.0;
    double prediction_time = 0.0;
    double truncated_mass = 0.0;  // mass of the (untruncated) predictive density on [0, S_t)
    std::vector<double> weights;
};

namespace detail {

// P(a < Z < b) for standard normal Z, accurate in both tails.
inline double normal_interval(double a, double b) {
    constexpr double r2 = std::numbers::sqrt2;
    if (!(b > a)) return 0.0;
    if (a >= 0.0) return 0.5 * (std::erfc(a / r2) - std::erfc(b / r2));
    if (b <= 0.0) return 0.5 * (std::erfc(-b / r2) - std::erfc(-a / r2));
    return 1.0 - 0.5 * std::erfc(b / r2) - 0.5 * std::erfc(-a / r2);
}

inline double std_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// Mixture mass on [lo, x].
inline double mixture_mass(std::span<const PhaseEvent> events, std::span<const double> w, double h, double lo,
                           double x) {
    double m = 0.0;
    for (std::size_t k = 0; k < events.size(); ++k) {
        const double mu = events[k].total_size;
        m += w[k] * normal_interval((lo - mu) / h, (x - mu) / h);
    }
    return m;
}

}  // namespace detail

// Predictive total for the phase after the last event. The density at time
// t + 1 is restricted to [0, S_t) so the prediction respects S_{k-1} > S_k.
inline Prediction predict_next_total(std::span<const PhaseEvent> events, const KdeConfig& config,
                                     std::span<const double> cv_samples = {}) {
    config.validate();
    if (events.size() < 2) throw InsufficientDataError("prediction needs at least 2 events");
    for (const auto& e : events) {
        if (!(e.total_size >= 0.0)) throw ValidationError("event totals must be non-negative");
    }

    Prediction out;
    double latest = events.front().window_end;
    const PhaseEvent* last = &events.front();
    for (const auto& e : events) {
        latest = std::max(latest, e.window_end);
        if (e.phase > last->phase) last = &e;
    }
    out.prediction_time = latest + 1.0;
    out.weights = temporal_weights(out.prediction_time, events, config.temporal_rate);

    if (config.bandwidth) {
        out.bandwidth = *config.bandwidth;
    } else {
        std::vector<double> samples(cv_samples.begin(), cv_samples.end());
        if (samples.size() < 2) {
            samples.clear();
            for (const auto& e : events) samples.push_back(e.total_size);
        }
        const auto grid = config.cv_grid.empty() ? default_cv_grid(samples) : config.cv_grid;
        out.bandwidth = select_bandwidth(samples, grid);
    }
    const double h = out.bandwidth;
    const double upper = last->total_size;

    out.truncated_mass = detail::mixture_mass(events, out.weights, h, 0.0, upper);
    if (!(out.truncated_mass >= 1e-12)) return out;

    double first_moment = 0.0;
    for (std::size_t k = 0; k < events.size(); ++k) {
        const double mu = events[k].total_size;
        const double a = (0.0 - mu) / h;
        const double b = (upper - mu) / h;
        first_moment += out.weights[k] *
                        (mu * detail::normal_interval(a, b) + h * (detail::std_normal_pdf(a) - detail::std_normal_pdf(b)));
    }
    out.predicted_next_total = std::clamp(first_moment / out.truncated_mass, 0.0, upper);

    // median by bisection on the restricted CDF
    double lo = 0.0;
    double hi = upper;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, upper); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (detail::mixture_mass(events, out.weights, h, 0.0, mid) < 0.5 * out.truncated_mass) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    out.median = 0.5 * (lo + hi);

    // mode: grid scan, then golden-section refinement around the best cell
    const int pts = config.integration_points;
    const double step = upper / (pts - 1);
    int best = 0;
    double best_f = -1.0;
    for (int k = 0; k < pts; ++k) {
        const double f = kde_density(k * step, events, out.weights, h);
        if (f > best_f) {
            best_f = f;
            best = k;
        }
    }
    double a = std::max(0.0, (best - 1) * step);
    double b = std::min(upper, (best + 1) * step);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 100 && b - a > 1e-12 * std::max(1.0, upper); ++it) {
        const double c = b - g * (b - a);
        const double d = a + g * (b - a);
        if (kde_density(c, events, out.weights, h) >= kde_density(d, events, out.weights, h)) {
            b = d;
        } else {
            a = c;
        }
    }
    out.mode = 0.5 * (a + b);
    return out;
}

struct StopDecision {
    std::optional<std::int64_t> stop_after_phase;  // nullopt = continue testing
};

// Smallest k - 1 such that the total of phase k is below epsilon.
inline StopDecision decide_stop(std::span<const double> totals, double epsilon) {
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    for (std::size_t k = 0; k < totals.size(); ++k) {
        if (!(totals[k] >= 0.0)) throw ValidationError("phase totals must be non-negative");
    }
    for (std::size_t k = 0; k < totals.size(); ++k) {
        if (totals[k] < epsilon) return {static_cast<std::int64_t>(k)};
    }
    return {};
}

}  // namespace sbrel
