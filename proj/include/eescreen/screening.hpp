#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "eescreen/equations.hpp"

namespace eescreen {

/// Covariates in descending order of importance. rank_of is 1-based.
struct Ranking {
    std::vector<std::size_t> order;
    std::vector<std::size_t> rank_of;

    static Ranking from_order(std::vector<std::size_t> order) {
        Ranking r;
        r.rank_of.assign(order.size(), 0);
        for (std::size_t k = 0; k < order.size(); ++k) r.rank_of[order[k]] = k + 1;
        r.order = std::move(order);
        return r;
    }

    std::size_t size() const noexcept { return order.size(); }
};

/// Descending statistic order; equal statistics keep the lower index first.
inline Ranking rank_statistics(std::span<const double> stats) {
    std::vector<std::size_t> order(stats.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return stats[a] > stats[b]; });
    return Ranking::from_order(std::move(order));
}

inline Ranking rank_statistics(const ScreeningStatVector& s) { return rank_statistics(s.stats); }

struct RetentionRule {
    enum class Kind { threshold, top_d };
    Kind kind = Kind::top_d;
    double gamma = 0.0;
    std::size_t d = 1;

    static RetentionRule threshold(double gamma) { return {Kind::threshold, gamma, 0}; }
    static RetentionRule top_d(std::size_t d) { return {Kind::top_d, 0.0, d}; }
};

/// floor(n / log n), the default retained-set size.
inline std::size_t default_top_d(std::size_t n) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) / std::log(static_cast<double>(n))));
}

struct RetainedSet {
    std::vector<std::size_t> indices;  // sorted ascending
    RetentionRule rule;
};

inline RetainedSet eescreen(const ScreeningStatVector& stats, const RetentionRule& rule) {
    const auto& st = stats.stats;
    RetainedSet out{{}, rule};
    if (rule.kind == RetentionRule::Kind::threshold) {
        if (!(rule.gamma >= 0)) fail(ErrorKind::invalid_argument, "threshold must be nonnegative");
        for (std::size_t j = 0; j < st.size(); ++j) {
            if (st[j] >= rule.gamma) out.indices.push_back(j);
        }
        return out;
    }
    if (rule.d < 1 || rule.d > st.size()) fail(ErrorKind::invalid_argument, "top-d needs 1 <= d <= p");
    const auto r = rank_statistics(st);
    out.indices.assign(r.order.begin(), r.order.begin() + static_cast<std::ptrdiff_t>(rule.d));
    std::sort(out.indices.begin(), out.indices.end());
    return out;
}

/// Smallest d such that the top d covariates contain the whole true support.
inline std::size_t minimum_model_size(const Ranking& ranking, const TrueModel& truth) {
    std::size_t worst = 0;
    for (auto j : truth.indices()) {
        if (j >= ranking.size()) fail(ErrorKind::out_of_range, "true index beyond p");
        worst = std::max(worst, ranking.rank_of[j]);
    }
    return worst;
}

inline std::size_t minimum_model_size(const ScreeningStatVector& stats, const TrueModel& truth) {
    return minimum_model_size(rank_statistics(stats), truth);
}

struct FpFnPoint {
    std::size_t false_negatives;
    std::size_t false_positives;
};

/// For each allowed number of false negatives f = 0..s-1, the false
/// positives in the smallest top-d set holding s - f true covariates.
inline std::vector<FpFnPoint> fp_fn_curve(const Ranking& ranking, const TrueModel& truth) {
    const auto idx = truth.indices();
    const std::size_t s = idx.size();
    if (s == 0) fail(ErrorKind::invalid_argument, "true model is empty");
    std::vector<std::size_t> ranks;
    for (auto j : idx) {
        if (j >= ranking.size()) fail(ErrorKind::out_of_range, "true index beyond p");
        ranks.push_back(ranking.rank_of[j]);
    }
    std::sort(ranks.begin(), ranks.end());
    std::vector<FpFnPoint> curve;
    for (std::size_t f = 0; f < s; ++f) {
        const std::size_t need = s - f;
        const std::size_t d = ranks[need - 1];
        curve.push_back({f, d - need});
    }
    return curve;
}

inline std::vector<FpFnPoint> fp_fn_curve(const ScreeningStatVector& stats, const TrueModel& truth) {
    return fp_fn_curve(rank_statistics(stats), truth);
}

// ---------------------------------------------------------------------------
// Marginal-regression baseline for the t-year model

struct MarginalScreen {
    std::vector<double> stats;     // |slope|, 0 where the fit failed
    std::vector<bool> converged;
    std::size_t nonconverged = 0;
    std::size_t clamped_weights = 0;

    ScreeningStatVector as_stats(const ModelSpec& model) const {
        ScreeningStatVector out;
        out.stats = stats;
        out.model = model;
        out.clamped_weights = clamped_weights;
        return out;
    }
};

struct NewtonOptions {
    int max_iter = 50;
    int max_halvings = 30;
    double tol = 1e-8;
};

namespace detail {

inline constexpr double kNewtonStepTol = 1e-4;

struct MarginalFit {
    double intercept = 0.0;
    double slope = 0.0;
    bool converged = false;
};

// Solves the intercept + one-covariate t-year equation
//   n^-1 sum_i (1, x_i) { r_i - expit(a + b x_i) } = 0
// by damped Newton-Raphson. Fits whose linear predictor leaves the link's
// non-saturated range are reported as divergent.
inline MarginalFit marginal_t_year_fit(std::span<const double> x, std::span<const double> r, double a0,
                                       const NewtonOptions& opt) {
    const std::size_t n = x.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    MarginalFit fit{a0, 0.0, false};

    auto score = [&](double a, double b, double& u1, double& u2, double& h11, double& h12, double& h22) {
        double s1 = 0, s2 = 0, w0 = 0, w1 = 0, w2 = 0;
        bool saturated = false;
        for (std::size_t i = 0; i < n; ++i) {
            const double eta = a + b * x[i];
            saturated = saturated || std::abs(eta) > kLinkCap;
            const double pi = expit(eta);
            const double res = r[i] - pi;
            const double w = pi * (1.0 - pi);
            s1 += res;
            s2 += res * x[i];
            w0 += w;
            w1 += w * x[i];
            w2 += w * x[i] * x[i];
        }
        u1 = s1 * inv_n;
        u2 = s2 * inv_n;
        h11 = w0 * inv_n;
        h12 = w1 * inv_n;
        h22 = w2 * inv_n;
        return !saturated;
    };

    double u1, u2, h11, h12, h22;
    if (!score(fit.intercept, fit.slope, u1, u2, h11, h12, h22)) return fit;
    // Converged means a small score and a small Newton step; under separation
    // the score decays while the step stays near one, so those fits run out
    // of iterations or leave the link's range.
    const auto newton_step = [&](double& da, double& db) {
        const double det = h11 * h22 - h12 * h12;
        if (!(det > 0) || !std::isfinite(det)) return false;
        da = (h22 * u1 - h12 * u2) / det;
        db = (h11 * u2 - h12 * u1) / det;
        return true;
    };
    for (int it = 0; it <= opt.max_iter; ++it) {
        const double norm = std::max(std::abs(u1), std::abs(u2));
        double da = 0, db = 0;
        if (!newton_step(da, db)) return fit;
        if (norm < opt.tol && std::max(std::abs(da), std::abs(db)) < kNewtonStepTol) {
            fit.converged = true;
            return fit;
        }
        if (it == opt.max_iter) break;
        double step = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opt.max_halvings; ++h, step *= 0.5) {
            const double a = fit.intercept + step * da;
            const double b = fit.slope + step * db;
            double v1, v2, g11, g12, g22;
            if (!score(a, b, v1, v2, g11, g12, g22)) return fit;  // divergent fit
            if (std::max(std::abs(v1), std::abs(v2)) < norm || norm < opt.tol) {
                fit.intercept = a;
                fit.slope = b;
                u1 = v1, u2 = v2, h11 = g11, h12 = g12, h22 = g22;
                accepted = true;
                break;
            }
        }
        if (!accepted) return fit;
    }
    return fit;
}

}  // namespace detail

/// Fits p marginal t-year regressions and returns |slope| per covariate.
inline MarginalScreen marginal_screen_tyear(const CovariateMatrix& x, const SurvivalSample& s, double t0,
                                            Side side = Side::left_limit, unsigned threads = 1,
                                            const NewtonOptions& opt = {}) {
    ModelSpec model{ModelKind::t_year, t0, side};
    detail::check_shapes(x, Outcome{s});
    const auto terms = detail::t_year_terms(model, s);
    const double a0 = fit_nuisance(model, s);
    MarginalScreen out;
    out.stats.assign(x.p(), 0.0);
    out.clamped_weights = terms.clamped;
    std::vector<char> ok(x.p(), 0);
    parallel_for(x.p(), threads, [&](std::size_t j) {
        const auto fit = detail::marginal_t_year_fit(x.col(j), terms.response, a0, opt);
        ok[j] = fit.converged;
        out.stats[j] = fit.converged ? std::abs(fit.slope) : 0.0;
    });
    out.converged.assign(ok.begin(), ok.end());
    out.nonconverged = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 0));
    return out;
}

}  // namespace eescreen
