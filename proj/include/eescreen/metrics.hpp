#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "eescreen/data.hpp"
#include "eescreen/survival.hpp"

namespace eescreen {

/// Risk scores oriented so that larger means higher predicted risk of an
/// early event. For a log-time predictor that is -X beta.
struct RiskScores {
    std::vector<double> scores;
};

/// IPCW Brier score at t0 for predicted survival probabilities P(T >= t0).
inline double brier(std::span<const double> predicted_survival, const SurvivalSample& s, double t0,
                    const StepFunction& sc, Side side = Side::left_limit) {
    const std::size_t n = s.size();
    if (predicted_survival.size() != n) fail(ErrorKind::invalid_argument, "prediction length does not match n");
    std::size_t clamped = 0;
    const double w_t0 = censoring_denominator(sc, t0, side, clamped);
    return pairwise_sum_of(n, [&](std::size_t i) {
               const double pi = predicted_survival[i];
               if (!(pi >= 0.0 && pi <= 1.0)) fail(ErrorKind::invalid_argument, "predictions must lie in [0, 1]");
               double term = 0.0;
               if (s.y[i] <= t0 && s.delta[i] == 1) {
                   term += pi * pi / censoring_denominator(sc, s.y[i], side, clamped);
               }
               if (s.y[i] >= t0) term += (1.0 - pi) * (1.0 - pi) / w_t0;
               return term;
           }) /
           static_cast<double>(n);
}

namespace detail {

inline double concordance_credit(double ri, double rj) {
    if (ri > rj) return 1.0;
    if (ri == rj) return 0.5;
    return 0.0;
}

}  // namespace detail

/// Cumulative-case / dynamic-control AUC at t0 with IPCW case weights.
/// Cases: events at or before t0. Controls: still at risk after t0.
inline double ipcw_auc(const RiskScores& risk, const SurvivalSample& s, double t0, const StepFunction& sc,
                       Side side = Side::left_limit) {
    const std::size_t n = s.size();
    const auto& r = risk.scores;
    if (r.size() != n) fail(ErrorKind::invalid_argument, "risk length does not match n");
    std::size_t clamped = 0;
    std::vector<double> w(n, 0.0);
    std::vector<std::size_t> controls;
    double w_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (s.delta[i] == 1 && s.y[i] <= t0) {
            w[i] = 1.0 / censoring_denominator(sc, s.y[i], side, clamped);
            w_sum += w[i];
        }
        if (s.y[i] > t0) controls.push_back(i);
    }
    if (w_sum == 0.0) fail(ErrorKind::no_cases, "no events at or before t0");
    if (controls.empty()) fail(ErrorKind::no_controls, "nobody observed beyond t0");
    double num = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (w[i] == 0.0) continue;
        double hits = 0.0;
        for (auto j : controls) hits += detail::concordance_credit(r[i], r[j]);
        num += w[i] * hits;
    }
    return num / (w_sum * static_cast<double>(controls.size()));
}

/// IPCW concordance truncated at tau. Usable pairs have an event first,
/// strictly before the other subject's time and before tau.
inline double c_statistic(const RiskScores& risk, const SurvivalSample& s, double tau, const StepFunction& sc,
                          Side side = Side::left_limit) {
    const std::size_t n = s.size();
    const auto& r = risk.scores;
    if (r.size() != n) fail(ErrorKind::invalid_argument, "risk length does not match n");
    std::size_t clamped = 0;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (s.delta[i] != 1 || !(s.y[i] < tau)) continue;
        const double g = censoring_denominator(sc, s.y[i], side, clamped);
        const double w = 1.0 / (g * g);
        for (std::size_t j = 0; j < n; ++j) {
            if (!(s.y[i] < s.y[j])) continue;
            num += w * detail::concordance_credit(r[i], r[j]);
            den += w;
        }
    }
    if (den == 0.0) fail(ErrorKind::no_comparable_pairs, "no usable pairs for the C-statistic");
    return num / den;
}

/// Default truncation time: the 90th percentile of observed times.
inline double default_tau(const SurvivalSample& s) { return quantile(s.y, 0.9); }

/// Squared Euclidean distance over the union of supports.
inline double mse(const SparseCoefs& beta_hat, const SparseCoefs& beta0) {
    double acc = 0.0;
    for (const auto& [j, b] : beta_hat) {
        auto it = beta0.find(j);
        const double d = b - (it == beta0.end() ? 0.0 : it->second);
        acc += d * d;
    }
    for (const auto& [j, b] : beta0) {
        if (!beta_hat.contains(j)) acc += b * b;
    }
    return acc;
}

inline double mse(const SparseCoefs& beta_hat, const TrueModel& truth) { return mse(beta_hat, truth.beta0); }

}  // namespace eescreen
