#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "sbrel/error.hpp"

namespace sbrel {

struct ConvergenceDiagnostic {
    double r_hat = 1.0;  // split-chain potential scale reduction
    double ess = 0.0;    // autocorrelation-based effective sample size
    bool degenerate = false;  // zero within-chain variance
};

namespace detail {

inline double mean_of(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

inline double autocov(std::span<const double> x, double mean, std::size_t lag) {
    double s = 0.0;
    for (std::size_t k = 0; k + lag < x.size(); ++k) s += (x[k] - mean) * (x[k + lag] - mean);
    return s / static_cast<double>(x.size());
}

}  // namespace detail

// Split R-hat and Geyer initial-monotone-sequence ESS over equally long chains.
inline ConvergenceDiagnostic diagnose(std::span<const std::vector<double>> chains) {
    if (chains.size() < 2) throw InsufficientDataError("diagnostics need at least 2 chains");
    std::size_t n = chains.front().size();
    for (const auto& c : chains) n = std::min(n, c.size());
    if (n < 10) throw InsufficientDataError("diagnostics need at least 10 draws per chain");

    // split every chain into two halves, dropping the middle draw of odd chains
    const std::size_t len = n / 2;
    std::vector<std::span<const double>> pieces;
    for (const auto& c : chains) {
        pieces.emplace_back(c.data(), len);
        pieces.emplace_back(c.data() + (n - len), len);
    }
    const double L = static_cast<double>(len);
    const double M = static_cast<double>(pieces.size());

    std::vector<double> means;
    std::vector<double> vars;
    for (auto piece : pieces) {
        const double mu = detail::mean_of(piece);
        means.push_back(mu);
        vars.push_back(detail::autocov(piece, mu, 0) * L / (L - 1.0));
    }
    const double W = detail::mean_of(vars);
    const double grand = detail::mean_of(means);
    double between = 0.0;  // B / L
    for (double mu : means) between += (mu - grand) * (mu - grand);
    between /= (M - 1.0);

    ConvergenceDiagnostic out;
    if (W <= 0.0) {
        out.degenerate = true;
        out.r_hat = between > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
        out.ess = between > 0.0 ? 1.0 : M * L;
        return out;
    }
    const double var_plus = (L - 1.0) / L * W + between;
    out.r_hat = std::sqrt(var_plus / W);

    const auto rho = [&](std::size_t lag) {
        double acov = 0.0;
        for (std::size_t m = 0; m < pieces.size(); ++m) acov += detail::autocov(pieces[m], means[m], lag);
        acov /= M;
        return 1.0 - (W - acov) / var_plus;
    };
    double sum = 0.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; 2 * k + 1 < len; ++k) {
        double pair = (k == 0 ? 1.0 : rho(2 * k)) + rho(2 * k + 1);
        if (pair <= 0.0) break;
        pair = std::min(pair, prev_pair);
        sum += pair;
        prev_pair = pair;
    }
    const double tau = std::max(-1.0 + 2.0 * sum, 1.0 / std::log10(M * L));
    out.ess = M * L / tau;
    return out;
}

}  // namespace sbrel
