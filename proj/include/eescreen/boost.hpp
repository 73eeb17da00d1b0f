#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "eescreen/equations.hpp"
#include "eescreen/metrics.hpp"
#include "eescreen/screening.hpp"

namespace eescreen {

struct PathUpdate {
    std::size_t t;  // 1-based iteration
    std::size_t j;
    int sign;       // applied increment is sign * epsilon
};

enum class StopReason { reached_t_max, stagnation };

inline std::string_view to_string(StopReason r) {
    return r == StopReason::stagnation ? "stagnation" : "reached_t_max";
}

/// Record of an epsilon-stagewise run. Coefficients are integer multiples of
/// epsilon, so the path is stored as signed unit steps.
struct CoefficientPath {
    double epsilon = 0.01;
    std::vector<PathUpdate> updates;
    ModelSpec model;
    double offset = 0.0;  // fixed intercept (t-year), 0 otherwise
    std::size_t p = 0;
    StopReason stop = StopReason::reached_t_max;
    // |U| at the final iterate; orders covariates that never entered.
    std::vector<double> final_abs_score;

    std::size_t iterations() const noexcept { return updates.size(); }
};

struct BoostOptions {
    double epsilon = 0.01;
    std::size_t t_max = 1000;
    unsigned threads = 1;
};

/// Starting from beta = 0, repeatedly moves the coordinate with the largest
/// |U_j| by epsilon in the direction of sign(U_j). Stops early if U vanishes.
inline CoefficientPath eeboost(const ModelSpec& model, const CovariateMatrix& x, const Outcome& o,
                               const BoostOptions& opt = {}) {
    if (!model.has_full_equation()) {
        fail(ErrorKind::unsupported_model, std::string(to_string(model.kind)) + " has no full estimating equation");
    }
    if (!(opt.epsilon > 0.0 && opt.epsilon <= 0.1)) fail(ErrorKind::invalid_argument, "epsilon must be in (0, 0.1]");
    if (opt.t_max < 1) fail(ErrorKind::invalid_argument, "t_max must be at least 1");

    CoefficientPath path;
    path.epsilon = opt.epsilon;
    path.model = model;
    path.p = x.p();
    if (model.kind == ModelKind::t_year) path.offset = fit_nuisance(model, survival_of(o, model.kind));

    std::vector<double> eta(x.n(), path.offset);
    auto u = score_at(model, x, o, eta, opt.threads);
    for (std::size_t t = 1; t <= opt.t_max; ++t) {
        std::size_t best = 0;
        double best_abs = -1.0;
        for (std::size_t j = 0; j < u.size(); ++j) {
            if (std::abs(u[j]) > best_abs) {
                best_abs = std::abs(u[j]);
                best = j;
            }
        }
        if (best_abs == 0.0) {
            path.stop = StopReason::stagnation;
            break;
        }
        const int sign = u[best] > 0 ? 1 : -1;
        path.updates.push_back({t, best, sign});
        const double step = sign * opt.epsilon;
        auto c = x.col(best);
        for (std::size_t i = 0; i < eta.size(); ++i) eta[i] += step * c[i];
        u = score_at(model, x, o, eta, opt.threads);
    }
    path.final_abs_score.resize(u.size());
    std::transform(u.begin(), u.end(), path.final_abs_score.begin(), [](double v) { return std::abs(v); });
    return path;
}

/// beta^(t) by replaying the first t updates.
inline SparseCoefs materialize(const CoefficientPath& path, std::size_t t) {
    if (t > path.updates.size()) fail(ErrorKind::out_of_range, "t beyond the path length");
    std::map<std::size_t, long> steps;
    for (std::size_t k = 0; k < t; ++k) steps[path.updates[k].j] += path.updates[k].sign;
    SparseCoefs beta;
    for (const auto& [j, m] : steps) {
        if (m != 0) beta[j] = static_cast<double>(m) * path.epsilon;
    }
    return beta;
}

struct SelectionChange {
    std::size_t t;      // iteration at which ||beta||_0 changed
    std::size_t j;      // coordinate that entered or left
    bool entering;
};

/// Support changes along a path. first_entry_order is the iterative
/// screening order: each coordinate listed once, when it first enters.
struct SelectionSequence {
    std::vector<SelectionChange> changes;
    std::vector<std::size_t> first_entry_order;

    std::vector<std::size_t> change_points() const {
        std::vector<std::size_t> out;
        for (const auto& c : changes) out.push_back(c.t);
        return out;
    }
};

inline SelectionSequence ieescreen(const CoefficientPath& path) {
    if (path.updates.empty()) fail(ErrorKind::invalid_argument, "empty path");
    SelectionSequence seq;
    std::map<std::size_t, long> steps;
    std::set<std::size_t> seen;
    for (const auto& u : path.updates) {
        long& m = steps[u.j];
        const bool was_zero = m == 0;
        m += u.sign;
        if (was_zero) {
            seq.changes.push_back({u.t, u.j, true});
            if (seen.insert(u.j).second) seq.first_entry_order.push_back(u.j);
        } else if (m == 0) {
            seq.changes.push_back({u.t, u.j, false});
        }
    }
    return seq;
}

/// Full ranking from a path: entry order first, then the covariates that
/// never entered, by |U_j| at the final iterate.
inline Ranking ieescreen_ranking(const CoefficientPath& path) {
    std::vector<std::size_t> order;
    std::vector<char> used(path.p, 0);
    if (!path.updates.empty()) {
        for (auto j : ieescreen(path).first_entry_order) {
            order.push_back(j);
            used[j] = 1;
        }
    }
    std::vector<std::size_t> rest;
    for (std::size_t j = 0; j < path.p; ++j) {
        if (!used[j]) rest.push_back(j);
    }
    const auto& sc = path.final_abs_score;
    std::stable_sort(rest.begin(), rest.end(), [&](auto a, auto b) { return sc[a] > sc[b]; });
    order.insert(order.end(), rest.begin(), rest.end());
    return Ranking::from_order(std::move(order));
}

// ---------------------------------------------------------------------------
// GCV-type tuning

enum class GcvCriterion { brier, gehan, squared_error };

struct GcvPoint {
    std::size_t t;
    std::size_t nonzero;
    double value;
};

struct GcvResult {
    std::size_t t_star = 0;
    SparseCoefs beta;
    double value = 0.0;
    std::vector<GcvPoint> grid;
};

/// Iterations at which the criterion is evaluated: every support change,
/// the last iterate before each change, and the final iterate.
inline std::vector<std::size_t> gcv_grid(const CoefficientPath& path) {
    std::set<std::size_t> grid;
    if (path.updates.empty()) return {};
    for (const auto& c : ieescreen(path).changes) {
        grid.insert(c.t);
        if (c.t > 1) grid.insert(c.t - 1);
    }
    grid.insert(path.updates.size());
    return {grid.begin(), grid.end()};
}

/// Argmin over evaluated points; ties go to the smaller t.
inline std::optional<GcvPoint> argmin_grid(const std::vector<GcvPoint>& grid) {
    std::optional<GcvPoint> best;
    for (const auto& g : grid) {
        if (!best || g.value < best->value || (g.value == best->value && g.t < best->t)) best = g;
    }
    return best;
}

inline GcvResult gcv_tune(const CoefficientPath& path, const CovariateMatrix& x, const Outcome& o,
                          GcvCriterion criterion) {
    const auto grid_t = gcv_grid(path);
    const std::size_t n = x.n();
    const double nd = static_cast<double>(n);

    std::optional<StepFunction> sc;
    double t0 = 0.0;
    if (criterion == GcvCriterion::brier) {
        t0 = path.model.require_t0();
        sc = km_censoring(survival_of(o, ModelKind::t_year));
    }

    GcvResult out;
    for (auto t : grid_t) {
        if (t == 0) continue;
        const auto beta = materialize(path, t);
        const std::size_t k = beta.size();
        if (k >= n) continue;
        double loss = 0.0;
        switch (criterion) {
            case GcvCriterion::brier: {
                auto eta = linear_predictor(x, beta, path.offset);
                for (auto& e : eta) e = expit(e);
                loss = brier(eta, survival_of(o, ModelKind::t_year), t0, *sc, path.model.censoring_weight_side);
                break;
            }
            case GcvCriterion::gehan:
                loss = gehan_loss(x, survival_of(o, ModelKind::aft_gehan), beta);
                break;
            case GcvCriterion::squared_error: {
                const auto& y = responses_of(o);
                const auto eta = linear_predictor(x, beta, path.offset);
                loss = pairwise_sum_of(n, [&](std::size_t i) { return (y[i] - eta[i]) * (y[i] - eta[i]); }) / nd;
                break;
            }
        }
        const double shrink = 1.0 - static_cast<double>(k) / nd;
        out.grid.push_back({t, k, loss / (shrink * shrink)});
    }
    const auto best = argmin_grid(out.grid);
    if (!best) fail(ErrorKind::empty_grid, "no admissible iteration to tune over");
    out.t_star = best->t;
    out.value = best->value;
    out.beta = materialize(path, best->t);
    return out;
}

/// Default criterion for a model: Brier for t-year, Gehan for AFT,
/// squared error for linear.
inline GcvCriterion default_criterion(ModelKind kind) {
    switch (kind) {
        case ModelKind::t_year: return GcvCriterion::brier;
        case ModelKind::aft_gehan: return GcvCriterion::gehan;
        default: return GcvCriterion::squared_error;
    }
}

}  // namespace eescreen
