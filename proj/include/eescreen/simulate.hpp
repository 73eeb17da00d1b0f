#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "eescreen/boost.hpp"
#include "eescreen/rng.hpp"

namespace eescreen {

enum class Correlation { partial_orthogonality, compound_symmetry };
enum class ErrorDist { logistic, standard_normal };

inline std::string_view to_string(Correlation c) {
    return c == Correlation::compound_symmetry ? "compound_symmetry" : "partial_orthogonality";
}

inline std::string_view to_string(ErrorDist e) { return e == ErrorDist::logistic ? "logistic" : "standard_normal"; }

struct T0Rule {
    enum class Kind { empirical_quantile, fixed };
    Kind kind = Kind::empirical_quantile;
    double value = 0.2;  // quantile level, or the time itself
};

struct BoostConfig {
    double epsilon = 0.01;
    std::size_t t_max = 1000;
};

/// Post-screening fit: EEBoost + GCV on the retained set, scored on an
/// independent test sample.
struct PostScreenConfig {
    std::size_t test_n = 100;
    std::vector<std::size_t> retain_sizes;  // empty means floor(n / log n)
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::size_t n = 100;
    std::size_t p = 2000;
    Correlation correlation = Correlation::partial_orthogonality;
    double rho = 0.5;
    ErrorDist error_dist = ErrorDist::standard_normal;
    double target_censoring = 0.5;
    T0Rule t0_rule;
    std::size_t replications = 50;
    std::uint64_t base_seed = 1;
    BoostConfig boost;
    std::optional<PostScreenConfig> post_screen;
};

inline constexpr std::size_t kTrueSize = 20;

inline void validate(const ScenarioConfig& cfg) {
    auto bad = [](const std::string& m) { fail(ErrorKind::invalid_config, m); };
    if (cfg.n < 10) bad("n must be at least 10");
    if (cfg.p < kTrueSize) bad("p must be at least 20");
    if (!(cfg.rho >= 0.0 && cfg.rho < 1.0)) bad("rho must lie in [0, 1)");
    if (!(cfg.target_censoring >= 0.0 && cfg.target_censoring < 1.0)) bad("target_censoring must lie in [0, 1)");
    if (cfg.replications < 1) bad("replications must be positive");
    if (cfg.t0_rule.kind == T0Rule::Kind::empirical_quantile &&
        !(cfg.t0_rule.value > 0.0 && cfg.t0_rule.value < 1.0)) {
        bad("t0 quantile must lie in (0, 1)");
    }
    if (cfg.t0_rule.kind == T0Rule::Kind::fixed && !(cfg.t0_rule.value > 0.0)) bad("fixed t0 must be positive");
    if (!(cfg.boost.epsilon > 0.0 && cfg.boost.epsilon <= 0.1)) bad("boost epsilon must lie in (0, 0.1]");
    if (cfg.boost.t_max < 1) bad("boost t_max must be positive");
    if (cfg.post_screen) {
        if (cfg.post_screen->test_n < 10) bad("post_screen test_n must be at least 10");
        for (auto d : cfg.post_screen->retain_sizes) {
            if (d < 1 || d > cfg.p) bad("retain_sizes entries must lie in [1, p]");
        }
    }
}

/// Ten coefficients of 1.5 followed by ten of -0.8 on coordinates 0..19.
inline TrueModel default_truth() {
    TrueModel t;
    for (std::size_t j = 0; j < 10; ++j) t.beta0[j] = 1.5;
    for (std::size_t j = 10; j < kTrueSize; ++j) t.beta0[j] = -0.8;
    return t;
}

// ---------------------------------------------------------------------------
// Covariates

struct BlockLayout {
    std::vector<std::size_t> sizes;
    bool fallback = false;  // small p: every block has 10 columns
};

/// Partial orthogonality at p = 20000 is nine blocks of 10, one of 910 and
/// nineteen of 1000. For other p the large block is L = p/20, the odd block
/// L - 90, and the last block absorbs the remainder. When L < 100 all blocks
/// have 10 columns and a short tail joins the last null block. Compound
/// symmetry is one block of p.
inline BlockLayout block_layout(Correlation corr, std::size_t p) {
    if (p < kTrueSize) fail(ErrorKind::layout_infeasible, "p must hold the 20 true coordinates");
    BlockLayout out;
    if (corr == Correlation::compound_symmetry) {
        out.sizes = {p};
        return out;
    }
    const std::size_t big = p / 20;
    if (big >= 100) {
        out.sizes.assign(9, 10);
        out.sizes.push_back(big - 90);
        for (int b = 0; b < 19; ++b) out.sizes.push_back(big);
        out.sizes.back() += p - 20 * big;
        return out;
    }
    out.fallback = true;
    for (std::size_t used = 0; used < p; used += 10) out.sizes.push_back(std::min<std::size_t>(10, p - used));
    // Never merge into the two blocks holding the true coordinates.
    if (out.sizes.size() > 3 && out.sizes.back() < 10) {
        const auto tail = out.sizes.back();
        out.sizes.pop_back();
        out.sizes.back() += tail;
    }
    return out;
}

namespace detail {

// Exchangeable normal blocks: sqrt(rho) * shared + sqrt(1 - rho) * own.
inline CovariateMatrix exchangeable_blocks(std::size_t n, const std::vector<std::size_t>& sizes, double rho,
                                           CounterRng& rng) {
    std::size_t p = 0;
    for (auto b : sizes) p += b;
    std::vector<double> v(n * p);
    std::vector<double> shared(n);
    std::normal_distribution<double> z;
    const double a = std::sqrt(rho), b = std::sqrt(1.0 - rho);
    std::size_t col = 0;
    for (auto size : sizes) {
        for (auto& s : shared) s = z(rng);
        for (std::size_t c = 0; c < size; ++c, ++col) {
            double* out = v.data() + col * n;
            for (std::size_t i = 0; i < n; ++i) out[i] = a * shared[i] + b * z(rng);
        }
    }
    return CovariateMatrix(n, p, std::move(v));
}

inline double draw_error(ErrorDist dist, CounterRng& rng) {
    if (dist == ErrorDist::standard_normal) return std::normal_distribution<double>()(rng);
    // Logistic with location -0.5, scale 1, by inversion.
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const double q = std::clamp(u, 1e-300, 1.0 - 1e-16);
    return -0.5 + std::log(q / (1.0 - q));
}

// Block sizes restricted to the true coordinates 0..19.
inline std::vector<std::size_t> true_block_sizes(const BlockLayout& layout) {
    std::vector<std::size_t> out;
    std::size_t used = 0;
    for (auto b : layout.sizes) {
        if (used >= kTrueSize) break;
        out.push_back(std::min(b, kTrueSize - used));
        used += out.back();
    }
    return out;
}

}  // namespace detail

/// Raw (unstandardized) covariates for replication `rep`.
inline CovariateMatrix gen_covariates(const ScenarioConfig& cfg, std::uint64_t rep,
                                      StreamTag tag = StreamTag::covariates, std::size_t n_override = 0) {
    auto rng = make_stream(cfg.base_seed, rep, tag);
    const auto layout = block_layout(cfg.correlation, cfg.p);
    return detail::exchangeable_blocks(n_override ? n_override : cfg.n, layout.sizes, cfg.rho, rng);
}

/// log T = X beta0 + eps; C ~ Exponential(lambda); observed (min(T, C), I(T <= C)).
inline SurvivalSample gen_outcomes(const CovariateMatrix& x, const TrueModel& truth, const ScenarioConfig& cfg,
                                   double lambda, std::uint64_t rep, StreamTag err_tag = StreamTag::errors,
                                   StreamTag cens_tag = StreamTag::censoring) {
    auto err = make_stream(cfg.base_seed, rep, err_tag);
    auto cen = make_stream(cfg.base_seed, rep, cens_tag);
    const auto eta = linear_predictor(x, truth.beta0);
    std::exponential_distribution<double> cdist(lambda > 0 ? lambda : 1.0);
    SurvivalSample s;
    s.t_true.emplace();
    for (std::size_t i = 0; i < x.n(); ++i) {
        const double t = std::exp(eta[i] + detail::draw_error(cfg.error_dist, err));
        const double c = lambda > 0 ? cdist(cen) : std::numeric_limits<double>::infinity();
        s.y.push_back(std::min(t, c));
        s.delta.push_back(t <= c ? 1 : 0);
        s.t_true->push_back(t);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Censoring calibration

struct CensoringCalibration {
    double lambda = 0.0;
    double realized = 0.0;  // censoring fraction on the pilot
    bool at_lower_bracket = false;
    bool within_tolerance = false;
};

inline constexpr double kLambdaLow = 1e-8;
inline constexpr double kLambdaHigh = 1e8;
inline constexpr double kCalibrationTolerance = 0.01;

/// Bisection (in log lambda) on the censoring fraction of `times` against
/// exponential censoring built from the fixed unit draws `unit_exp`.
inline CensoringCalibration calibrate_censoring(std::span<const double> times, std::span<const double> unit_exp,
                                                double target) {
    if (times.empty() || times.size() != unit_exp.size()) {
        fail(ErrorKind::invalid_argument, "pilot sizes do not match");
    }
    auto fraction = [&](double lambda) {
        std::size_t c = 0;
        for (std::size_t i = 0; i < times.size(); ++i) c += unit_exp[i] / lambda < times[i];
        return static_cast<double>(c) / static_cast<double>(times.size());
    };
    CensoringCalibration out;
    double lo = std::log(kLambdaLow), hi = std::log(kLambdaHigh);
    const double f_lo = fraction(kLambdaLow), f_hi = fraction(kLambdaHigh);
    // Targets at or below the lightest censoring reachable pin lambda to the
    // lower bracket; the flag tells the caller.
    if (target <= f_lo + kCalibrationTolerance) {
        out = {kLambdaLow, f_lo, true, std::abs(f_lo - target) <= kCalibrationTolerance};
        return out;
    }
    if (f_hi < target) fail(ErrorKind::non_bracketing, "censoring target is not bracketed");
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
        const double mid = 0.5 * (lo + hi);
        (fraction(std::exp(mid)) < target ? lo : hi) = mid;
    }
    out.lambda = std::exp(0.5 * (lo + hi));
    out.realized = fraction(out.lambda);
    out.within_tolerance = std::abs(out.realized - target) <= kCalibrationTolerance;
    return out;
}

inline constexpr std::size_t kPilotSize = 5000;

struct ScenarioCalibration {
    CensoringCalibration censoring;
    double t0 = 0.0;
};

/// Pilot of 5000 draws using only the true columns (their joint law does not
/// depend on the null columns). Gives lambda and the t-year horizon.
inline ScenarioCalibration calibrate_scenario(const ScenarioConfig& cfg, const TrueModel& truth) {
    auto xr = make_stream(cfg.base_seed, 0, StreamTag::pilot);
    const auto sizes = detail::true_block_sizes(block_layout(cfg.correlation, cfg.p));
    const auto x = detail::exchangeable_blocks(kPilotSize, sizes, cfg.rho, xr);
    const auto eta = linear_predictor(x, truth.beta0);
    std::exponential_distribution<double> unit;
    std::vector<double> t(kPilotSize), e(kPilotSize);
    for (std::size_t i = 0; i < kPilotSize; ++i) {
        t[i] = std::exp(eta[i] + detail::draw_error(cfg.error_dist, xr));
        e[i] = unit(xr);
    }
    ScenarioCalibration out;
    out.censoring = calibrate_censoring(t, e, cfg.target_censoring);
    out.t0 = cfg.t0_rule.kind == T0Rule::Kind::fixed ? cfg.t0_rule.value : quantile(t, cfg.t0_rule.value);
    return out;
}

// ---------------------------------------------------------------------------
// Experiment loop

enum class MethodKind { eescreen, modelfree, zhu_omega, marginal_tyear, ieescreen };

struct Method {
    MethodKind kind = MethodKind::eescreen;
    ModelKind model = ModelKind::aft_gehan;  // for eescreen / ieescreen

    std::string name() const {
        switch (kind) {
            case MethodKind::eescreen: return "eescreen:" + std::string(to_string(model));
            case MethodKind::ieescreen: return "ieescreen:" + std::string(to_string(model));
            case MethodKind::modelfree: return "modelfree";
            case MethodKind::zhu_omega: return "zhu_omega";
            case MethodKind::marginal_tyear: return "marginal_tyear";
        }
        return "unknown";
    }
};

inline Method parse_method(std::string_view s) {
    if (s == "modelfree") return {MethodKind::modelfree, ModelKind::model_free_si};
    if (s == "zhu_omega") return {MethodKind::zhu_omega, ModelKind::model_free_si};
    if (s == "marginal_tyear") return {MethodKind::marginal_tyear, ModelKind::t_year};
    const auto colon = s.find(':');
    if (colon != std::string_view::npos) {
        const auto head = s.substr(0, colon);
        const auto model = parse_model_kind(s.substr(colon + 1));
        if (model && *model != ModelKind::linear && *model != ModelKind::model_free_si) {
            if (head == "eescreen") return {MethodKind::eescreen, *model};
            if (head == "ieescreen" && *model != ModelKind::cox_score) return {MethodKind::ieescreen, *model};
        }
    }
    fail(ErrorKind::invalid_argument, "unknown method '" + std::string(s) + "'");
}

// Post-screening fit on the top `retained` covariates. For iEEScreen the
// path itself does the selection and retained is 0.
struct PostScreenPoint {
    std::size_t retained = 0;
    double mse = 0.0;
    double prediction = 0.0;  // AUC (t-year) or C-statistic (AFT)
};

struct MethodRecord {
    std::size_t min_model_size = 0;
    std::vector<std::size_t> fp_at_fn;  // index = allowed false negatives
    std::size_t nonconverged = 0;       // marginal fits that failed
    std::vector<PostScreenPoint> post;
};

struct ReplicationRecord {
    std::size_t rep = 0;
    double censoring_fraction = 0.0;
    std::vector<MethodRecord> methods;  // aligned with the method list
};

struct MethodAggregate {
    std::string method;
    double median_min_model_size = 0.0;
    double iqr_min_model_size = 0.0;
    double sure_screening_fraction = 0.0;  // mms <= floor(n / log n)
    std::vector<double> mean_fp;           // per allowed false negatives
    std::vector<double> sd_fp;
    struct Post {
        std::size_t retained = 0;
        double mean_mse = 0.0, sd_mse = 0.0;
        double mean_prediction = 0.0, sd_prediction = 0.0;
    };
    std::vector<Post> post;  // one entry per retained size
    std::size_t total_nonconverged = 0;
};

struct ReplicationSummary {
    ScenarioConfig config;
    std::vector<Method> methods;
    ScenarioCalibration calibration;
    std::vector<ReplicationRecord> replications;
    std::vector<MethodAggregate> aggregates;
};

namespace detail {

inline std::pair<double, double> mean_sd(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    const double m = pairwise_sum(v) / static_cast<double>(v.size());
    if (v.size() < 2) return {m, 0.0};
    const double ss = pairwise_sum_of(v.size(), [&](std::size_t i) { return (v[i] - m) * (v[i] - m); });
    return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

inline ModelSpec method_model(const Method& m, double t0) {
    ModelSpec spec;
    spec.kind = m.model;
    if (m.model == ModelKind::t_year) spec.t0 = t0;
    return spec;
}

// Prediction accuracy of beta (on standardized training columns) on a test
// sample: AUC at t0 for t-year, truncated C-statistic for AFT.
inline double prediction_score(const ModelSpec& model, const SparseCoefs& beta, double offset,
                               const CovariateMatrix& test_x, const SurvivalSample& test_s) {
    auto eta = linear_predictor(test_x, beta, offset);
    RiskScores risk;
    risk.scores.resize(eta.size());
    // Larger eta means longer survival in both models.
    std::transform(eta.begin(), eta.end(), risk.scores.begin(), [](double e) { return -e; });
    const auto sc = km_censoring(test_s);
    if (model.kind == ModelKind::t_year) return ipcw_auc(risk, test_s, *model.t0, sc);
    return c_statistic(risk, test_s, default_tau(test_s), sc);
}

struct TestSample {
    CovariateMatrix x;
    SurvivalSample s;
};

}  // namespace detail

/// One replication: generate data, rank covariates with every method, and
/// optionally fit and score the post-screening model.
inline ReplicationRecord run_replication(const ScenarioConfig& cfg, const std::vector<Method>& methods,
                                         const TrueModel& truth, const ScenarioCalibration& cal, std::size_t rep) {
    const auto raw = gen_covariates(cfg, rep);
    const auto s = gen_outcomes(raw, truth, cfg, cal.censoring.lambda, rep);
    const auto x = standardize(raw);

    ReplicationRecord rec;
    rec.rep = rep;
    rec.censoring_fraction =
        1.0 - static_cast<double>(std::count(s.delta.begin(), s.delta.end(), 1)) / static_cast<double>(s.size());

    std::optional<detail::TestSample> test;
    if (cfg.post_screen) {
        const auto traw = gen_covariates(cfg, rep, StreamTag::test_covariates, cfg.post_screen->test_n);
        auto ts = gen_outcomes(traw, truth, cfg, cal.censoring.lambda, rep, StreamTag::test_errors,
                               StreamTag::test_censoring);
        test = detail::TestSample{apply_standardization(traw, x.col_means(), x.col_scales()), std::move(ts)};
    }
    std::vector<std::size_t> sizes;
    if (cfg.post_screen) sizes = cfg.post_screen->retain_sizes;
    if (sizes.empty()) sizes.push_back(std::min(default_top_d(cfg.n), cfg.p));
    const BoostOptions bopt{cfg.boost.epsilon, cfg.boost.t_max, 1};

    for (const auto& m : methods) {
        MethodRecord r;
        Ranking ranking;
        std::optional<CoefficientPath> path;
        const auto model = detail::method_model(m, cal.t0);
        switch (m.kind) {
            case MethodKind::eescreen:
            case MethodKind::modelfree:
                ranking = rank_statistics(screening_stats(model, x, s));
                break;
            case MethodKind::zhu_omega:
                ranking = rank_statistics(zhu_omega_stats(x, s));
                break;
            case MethodKind::marginal_tyear: {
                const auto ms = marginal_screen_tyear(x, s, cal.t0);
                r.nonconverged = ms.nonconverged;
                ranking = rank_statistics(ms.stats);
                break;
            }
            case MethodKind::ieescreen:
                path = eeboost(model, x, s, bopt);
                ranking = ieescreen_ranking(*path);
                break;
        }
        r.min_model_size = minimum_model_size(ranking, truth);
        for (const auto& pt : fp_fn_curve(ranking, truth)) r.fp_at_fn.push_back(pt.false_positives);

        if (test && model.has_full_equation() && m.kind != MethodKind::marginal_tyear) {
            auto score = [&](std::size_t retained, const SparseCoefs& beta, double offset) {
                r.post.push_back({retained, mse(beta, truth),
                                  detail::prediction_score(model, beta, offset, test->x, test->s)});
            };
            if (path) {
                score(0, gcv_tune(*path, x, s, default_criterion(model.kind)).beta, path->offset);
            } else {
                for (const std::size_t d : sizes) {
                    std::vector<std::size_t> keep(ranking.order.begin(), ranking.order.begin() + d);
                    std::sort(keep.begin(), keep.end());
                    const auto sub = x.select_columns(keep);
                    const auto sub_path = eeboost(model, sub, s, bopt);
                    SparseCoefs beta;
                    if (sub_path.iterations() > 0) {
                        for (const auto& [j, b] : gcv_tune(sub_path, sub, s, default_criterion(model.kind)).beta) {
                            beta[keep[j]] = b;
                        }
                    }
                    score(d, beta, sub_path.offset);
                }
            }
        }
        rec.methods.push_back(std::move(r));
    }
    return rec;
}

inline std::vector<MethodAggregate> aggregate(const ScenarioConfig& cfg, const std::vector<Method>& methods,
                                              const std::vector<ReplicationRecord>& reps) {
    std::vector<MethodAggregate> out;
    const double d = static_cast<double>(default_top_d(cfg.n));
    for (std::size_t k = 0; k < methods.size(); ++k) {
        MethodAggregate a;
        a.method = methods[k].name();
        std::vector<double> mms;
        std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> post;
        std::vector<std::vector<double>> fp;
        std::size_t sure = 0;
        for (const auto& rec : reps) {
            const auto& r = rec.methods[k];
            mms.push_back(static_cast<double>(r.min_model_size));
            sure += static_cast<double>(r.min_model_size) <= d;
            if (fp.size() < r.fp_at_fn.size()) fp.resize(r.fp_at_fn.size());
            for (std::size_t f = 0; f < r.fp_at_fn.size(); ++f) fp[f].push_back(static_cast<double>(r.fp_at_fn[f]));
            for (const auto& pt : r.post) {
                post[pt.retained].first.push_back(pt.mse);
                post[pt.retained].second.push_back(pt.prediction);
            }
            a.total_nonconverged += r.nonconverged;
        }
        a.median_min_model_size = quantile(mms, 0.5);
        a.iqr_min_model_size = quantile(mms, 0.75) - quantile(mms, 0.25);
        a.sure_screening_fraction = static_cast<double>(sure) / static_cast<double>(reps.size());
        for (const auto& col : fp) {
            const auto [m, sd] = detail::mean_sd(col);
            a.mean_fp.push_back(m);
            a.sd_fp.push_back(sd);
        }
        for (const auto& [retained, vals] : post) {
            MethodAggregate::Post pa;
            pa.retained = retained;
            std::tie(pa.mean_mse, pa.sd_mse) = detail::mean_sd(vals.first);
            std::tie(pa.mean_prediction, pa.sd_prediction) = detail::mean_sd(vals.second);
            a.post.push_back(pa);
        }
        out.push_back(std::move(a));
    }
    return out;
}

/// Runs every replication (in parallel when threads > 1) and aggregates.
/// Each replication owns its random streams, so results do not depend on
/// the thread count or scheduling.
inline ReplicationSummary run_experiment(const ScenarioConfig& cfg, const std::vector<Method>& methods,
                                         unsigned threads = 1) {
    validate(cfg);
    if (methods.empty()) fail(ErrorKind::invalid_argument, "no methods requested");
    ReplicationSummary out;
    out.config = cfg;
    out.methods = methods;
    const auto truth = default_truth();
    out.calibration = calibrate_scenario(cfg, truth);
    out.replications.resize(cfg.replications);
    parallel_for(cfg.replications, resolve_threads(threads), [&](std::size_t rep) {
        try {
            out.replications[rep] = run_replication(cfg, methods, truth, out.calibration, rep);
        } catch (const Error& e) {
            fail(e.kind(), "replication " + std::to_string(rep) + ": " + e.what());
        }
    });
    out.aggregates = aggregate(cfg, methods, out.replications);
    return out;
}

}  // namespace eescreen
