#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "eescreen/data.hpp"
#include "eescreen/numeric.hpp"
#include "eescreen/survival.hpp"

namespace eescreen {

enum class ModelKind { linear, cox_score, t_year, aft_gehan, model_free_si };

inline std::string_view to_string(ModelKind k) {
    switch (k) {
        case ModelKind::linear: return "linear";
        case ModelKind::cox_score: return "cox";
        case ModelKind::t_year: return "tyear";
        case ModelKind::aft_gehan: return "aft";
        case ModelKind::model_free_si: return "modelfree";
    }
    return "unknown";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
    for (auto k : {ModelKind::linear, ModelKind::cox_score, ModelKind::t_year, ModelKind::aft_gehan,
                   ModelKind::model_free_si}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

struct ModelSpec {
    ModelKind kind = ModelKind::linear;
    std::optional<double> t0;  // required for t_year
    Side censoring_weight_side = Side::left_limit;

    double require_t0() const {
        if (kind != ModelKind::t_year) fail(ErrorKind::invalid_argument, "t0 only applies to the t-year model");
        if (!t0 || !(*t0 > 0)) fail(ErrorKind::invalid_argument, "t-year model needs t0 > 0");
        return *t0;
    }

    bool has_full_equation() const {
        return kind == ModelKind::linear || kind == ModelKind::t_year || kind == ModelKind::aft_gehan;
    }
};

using Responses = std::vector<double>;
using Outcome = std::variant<Responses, SurvivalSample>;

inline const SurvivalSample& survival_of(const Outcome& o, ModelKind kind) {
    if (const auto* s = std::get_if<SurvivalSample>(&o)) return *s;
    fail(ErrorKind::invalid_argument, std::string(to_string(kind)) + " model needs a survival outcome");
}

inline const Responses& responses_of(const Outcome& o) {
    if (const auto* r = std::get_if<Responses>(&o)) return *r;
    fail(ErrorKind::invalid_argument, "linear model needs a numeric response");
}

inline std::size_t outcome_size(const Outcome& o) {
    return std::visit([](const auto& v) { return v.size(); }, o);
}

/// |U_j| for every covariate, evaluated at zero or at the fitted nuisance.
struct ScreeningStatVector {
    std::vector<double> stats;
    std::optional<double> nuisance;
    ModelSpec model;
    std::size_t clamped_weights = 0;
    bool degenerate = false;
};

/// eta_i = offset + sum_j X_ij beta_j, accumulated over the support in
/// increasing index order.
inline std::vector<double> linear_predictor(const CovariateMatrix& x, const SparseCoefs& beta,
                                            double offset = 0.0) {
    std::vector<double> eta(x.n(), offset);
    for (const auto& [j, b] : beta) {
        if (j >= x.p()) fail(ErrorKind::out_of_range, "coefficient index out of range");
        if (b == 0.0) continue;
        auto c = x.col(j);
        for (std::size_t i = 0; i < x.n(); ++i) eta[i] += c[i] * b;
    }
    return eta;
}

namespace detail {

// Ascending order of `key` plus, for every sorted position, the first and
// one-past-last position of its tie group.
struct TieGroups {
    std::vector<std::size_t> order;
    std::vector<std::size_t> position;  // inverse of order
    std::vector<std::size_t> group_begin;
    std::vector<std::size_t> group_end;

    explicit TieGroups(std::span<const double> key) {
        const std::size_t n = key.size();
        order.resize(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return key[a] < key[b]; });
        position.resize(n);
        group_begin.resize(n);
        group_end.resize(n);
        for (std::size_t q = 0; q < n; ++q) position[order[q]] = q;
        for (std::size_t q = 0; q < n;) {
            std::size_t r = q;
            while (r < n && key[order[r]] == key[order[q]]) ++r;
            for (std::size_t s = q; s < r; ++s) {
                group_begin[s] = q;
                group_end[s] = r;
            }
            q = r;
        }
    }
};

inline std::vector<std::size_t> event_rows(const SurvivalSample& s) {
    std::vector<std::size_t> ev;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.delta[i] == 1) ev.push_back(i);
    }
    return ev;
}

// Gehan-type column reduction:
//   sum over events i of { sum_{k: key_k >= key_i} x_k - #{k: key_k >= key_i} x_i }.
// Shares one sort across all columns; O(n) per column.
class GehanKernel {
public:
    GehanKernel(std::span<const double> key, const SurvivalSample& s)
        : groups_(key), events_(event_rows(s)) {}

    double column(std::span<const double> x) const {
        const std::size_t n = x.size();
        thread_local std::vector<double> suffix;
        suffix.assign(n + 1, 0.0);
        for (std::size_t q = n; q-- > 0;) suffix[q] = suffix[q + 1] + x[groups_.order[q]];
        return pairwise_sum_of(events_.size(), [&](std::size_t e) {
            const std::size_t i = events_[e];
            const std::size_t g = groups_.group_begin[groups_.position[i]];
            return suffix[g] - static_cast<double>(n - g) * x[i];
        });
    }

    // Cox score at zero: sum over events of x_i - mean of x over the risk set.
    double cox_column(std::span<const double> x) const {
        const std::size_t n = x.size();
        thread_local std::vector<double> suffix;
        suffix.assign(n + 1, 0.0);
        for (std::size_t q = n; q-- > 0;) suffix[q] = suffix[q + 1] + x[groups_.order[q]];
        return pairwise_sum_of(events_.size(), [&](std::size_t e) {
            const std::size_t i = events_[e];
            const std::size_t g = groups_.group_begin[groups_.position[i]];
            return x[i] - suffix[g] / static_cast<double>(n - g);
        });
    }

private:
    TieGroups groups_;
    std::vector<std::size_t> events_;
};

inline void check_shapes(const CovariateMatrix& x, const Outcome& o) {
    if (!x.standardized()) fail(ErrorKind::invalid_argument, "covariates must be standardized first");
    if (outcome_size(o) != x.n()) fail(ErrorKind::invalid_argument, "outcome length does not match n");
}

inline std::vector<double> log_times(const SurvivalSample& s) {
    std::vector<double> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!(s.y[i] > 0)) fail(ErrorKind::nonpositive_time, "log-time needs Y > 0 (row " + std::to_string(i) + ")");
        out[i] = std::log(s.y[i]);
    }
    return out;
}

struct TYearTerms {
    std::vector<double> response;  // I(Y_i >= t0) / S_C(t0)
    std::size_t clamped = 0;
    bool degenerate = false;
};

inline TYearTerms t_year_terms(const ModelSpec& model, const SurvivalSample& s) {
    const double t0 = model.require_t0();
    const auto sc = km_censoring(s);
    if (sc.eval(t0, model.censoring_weight_side) <= 0.0) {
        fail(ErrorKind::degenerate_outcome, "censoring survival is zero at t0");
    }
    TYearTerms out;
    const double denom = censoring_denominator(sc, t0, model.censoring_weight_side, out.clamped);
    std::size_t above = 0;
    out.response.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const bool at_risk = s.y[i] >= t0;
        above += at_risk;
        out.response[i] = at_risk ? 1.0 / denom : 0.0;
    }
    out.degenerate = above == 0 || above == s.size();
    return out;
}

}  // namespace detail

/// Intercept-only root of the t-year equation: logit of the IPCW-weighted
/// fraction surviving past t0, clamped to [1e-6, 1 - 1e-6].
inline double fit_nuisance(const ModelSpec& model, const SurvivalSample& s) {
    if (model.kind != ModelKind::t_year) {
        fail(ErrorKind::unsupported_model, "only the t-year model carries an intercept nuisance");
    }
    const auto terms = detail::t_year_terms(model, s);
    const double pi_bar =
        std::clamp(pairwise_sum(terms.response) / static_cast<double>(s.size()), 1e-6, 1.0 - 1e-6);
    return logit(pi_bar);
}

/// U evaluated at a given linear predictor (offset included). Shared by
/// evaluate_full and the boosting loop, which updates eta incrementally.
inline std::vector<double> score_at(const ModelSpec& model, const CovariateMatrix& x, const Outcome& o,
                                    std::span<const double> eta, unsigned threads = 1) {
    detail::check_shapes(x, o);
    const std::size_t n = x.n();
    std::vector<double> u(x.p());
    switch (model.kind) {
        case ModelKind::linear: {
            const auto& y = responses_of(o);
            std::vector<double> r(n);
            for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - eta[i];
            parallel_for(x.p(), threads, [&](std::size_t j) { u[j] = pairwise_dot(x.col(j), r); });
            break;
        }
        case ModelKind::t_year: {
            // Logit link: pi'(eta) / {pi (1 - pi)} = 1, leaving the residual.
            const auto terms = detail::t_year_terms(model, survival_of(o, model.kind));
            std::vector<double> r(n);
            for (std::size_t i = 0; i < n; ++i) r[i] = terms.response[i] - expit(eta[i]);
            const double inv_n = 1.0 / static_cast<double>(n);
            parallel_for(x.p(), threads, [&](std::size_t j) { u[j] = pairwise_dot(x.col(j), r) * inv_n; });
            break;
        }
        case ModelKind::aft_gehan: {
            const auto& s = survival_of(o, model.kind);
            auto e = detail::log_times(s);
            for (std::size_t i = 0; i < n; ++i) e[i] -= eta[i];
            const detail::GehanKernel kernel(e, s);
            const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
            parallel_for(x.p(), threads, [&](std::size_t j) { u[j] = kernel.column(x.col(j)) * scale; });
            break;
        }
        case ModelKind::cox_score:
        case ModelKind::model_free_si:
            fail(ErrorKind::unsupported_model,
                 std::string(to_string(model.kind)) + " provides only its screening statistic");
    }
    return u;
}

/// Full estimating equation U(beta). `offset` is added to every linear
/// predictor (the t-year boosting loop passes the fitted intercept here).
inline std::vector<double> evaluate_full(const ModelSpec& model, const CovariateMatrix& x, const Outcome& o,
                                         const SparseCoefs& beta, double offset = 0.0,
                                         unsigned threads = 1) {
    if (!model.has_full_equation()) {
        fail(ErrorKind::unsupported_model,
             std::string(to_string(model.kind)) + " provides only its screening statistic");
    }
    const auto eta = linear_predictor(x, beta, offset);
    return score_at(model, x, o, eta, threads);
}

/// Screening statistics |U_j(0)| (or |U_j(eta)| with the t-year intercept),
/// each computed through the model's O(n log n + np) path.
inline ScreeningStatVector screening_stats(const ModelSpec& model, const CovariateMatrix& x, const Outcome& o,
                                           unsigned threads = 1) {
    detail::check_shapes(x, o);
    const std::size_t n = x.n();
    const double inv_n = 1.0 / static_cast<double>(n);
    ScreeningStatVector out;
    out.model = model;
    out.stats.assign(x.p(), 0.0);
    auto& st = out.stats;

    switch (model.kind) {
        case ModelKind::linear: {
            const auto& y = responses_of(o);
            parallel_for(x.p(), threads, [&](std::size_t j) { st[j] = std::abs(pairwise_dot(x.col(j), y)); });
            break;
        }
        case ModelKind::cox_score: {
            const auto& s = survival_of(o, model.kind);
            const detail::GehanKernel kernel(s.y, s);
            parallel_for(x.p(), threads, [&](std::size_t j) { st[j] = std::abs(kernel.cox_column(x.col(j))); });
            break;
        }
        case ModelKind::t_year: {
            const auto& s = survival_of(o, model.kind);
            auto terms = detail::t_year_terms(model, s);
            out.clamped_weights = terms.clamped;
            if (terms.degenerate) {
                out.degenerate = true;
                break;
            }
            const double b0 = fit_nuisance(model, s);
            out.nuisance = b0;
            const double pi0 = expit(b0);
            for (auto& r : terms.response) r -= pi0;
            parallel_for(x.p(), threads,
                         [&](std::size_t j) { st[j] = std::abs(pairwise_dot(x.col(j), terms.response) * inv_n); });
            break;
        }
        case ModelKind::aft_gehan: {
            // At beta = 0 only the order of log Y matters, so Y itself is the key.
            const auto& s = survival_of(o, model.kind);
            const detail::GehanKernel kernel(s.y, s);
            const double scale = inv_n * inv_n;
            parallel_for(x.p(), threads, [&](std::size_t j) { st[j] = std::abs(kernel.column(x.col(j)) * scale); });
            break;
        }
        case ModelKind::model_free_si: {
            // n^-2 sum_k sum_i X_ij delta_i I(Y_i < Y_k) / S_C(Y_i)^2
            //   = n^-2 sum_i X_ij delta_i #{k: Y_k > Y_i} / S_C(Y_i)^2
            const auto& s = survival_of(o, model.kind);
            const auto sc = km_censoring(s);
            const detail::TieGroups groups(s.y);
            std::vector<double> w(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (s.delta[i] != 1) continue;
                const double d = censoring_denominator(sc, s.y[i], model.censoring_weight_side, out.clamped_weights);
                const auto greater = n - groups.group_end[groups.position[i]];
                w[i] = static_cast<double>(greater) / (d * d);
            }
            const double scale = inv_n * inv_n;
            parallel_for(x.p(), threads, [&](std::size_t j) { st[j] = std::abs(pairwise_dot(x.col(j), w) * scale); });
            break;
        }
    }
    return out;
}

/// Gehan loss for precomputed residuals e_i; clamped at zero against roundoff.
inline double gehan_loss_from_residuals(std::span<const double> e, const SurvivalSample& s) {
    const detail::GehanKernel kernel(e, s);
    const auto n = static_cast<double>(e.size());
    return std::max(0.0, kernel.column(e) / (n * n));
}

/// Squared-average comparator with IPCW:
///   n^-1 sum_k { n^-1 sum_i X_ij delta_i I(Y_i < Y_k) / S_C(Y_i)^2 }^2.
/// The square blocks swapping the sums, but inner sums for every k come from
/// one prefix pass in Y order, so the cost is still O(n) per column.
/// With no censoring this is the uncensored omega-tilde statistic.
inline ScreeningStatVector zhu_omega_stats(const CovariateMatrix& x, const SurvivalSample& s,
                                           Side side = Side::left_limit, unsigned threads = 1) {
    detail::check_shapes(x, Outcome{s});
    const std::size_t n = x.n();
    const double inv_n = 1.0 / static_cast<double>(n);
    ScreeningStatVector out;
    out.model.kind = ModelKind::model_free_si;
    out.model.censoring_weight_side = side;
    out.stats.assign(x.p(), 0.0);

    const auto sc = km_censoring(s);
    const detail::TieGroups groups(s.y);
    std::vector<double> a(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (s.delta[i] != 1) continue;
        const double d = censoring_denominator(sc, s.y[i], side, out.clamped_weights);
        a[i] = 1.0 / (d * d);
    }
    parallel_for(x.p(), threads, [&](std::size_t j) {
        auto c = x.col(j);
        thread_local std::vector<double> prefix;
        prefix.assign(n + 1, 0.0);
        for (std::size_t q = 0; q < n; ++q) {
            const auto i = groups.order[q];
            prefix[q + 1] = prefix[q] + c[i] * a[i];
        }
        out.stats[j] = pairwise_sum_of(n, [&](std::size_t k) {
                           const double inner = prefix[groups.group_begin[groups.position[k]]] * inv_n;
                           return inner * inner;
                       }) * inv_n;
    });
    return out;
}

/// Gehan loss n^-2 sum_i sum_k (e_k - e_i) I(e_i <= e_k) delta_i with
/// e_i = log Y_i - X_i beta, via one sort of the residuals.
inline double gehan_loss(const CovariateMatrix& x, const SurvivalSample& s, const SparseCoefs& beta) {
    if (s.size() != x.n()) fail(ErrorKind::invalid_argument, "outcome length does not match n");
    auto e = detail::log_times(s);
    const auto eta = linear_predictor(x, beta);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] -= eta[i];
    return gehan_loss_from_residuals(e, s);
}

}  // namespace eescreen
