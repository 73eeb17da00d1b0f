// Simulate one dataset, screen it, fit EEBoost on the retained covariates and
// score the fit on a fresh sample.

#include <cstdio>

#include "eescreen/eescreen.hpp"

using namespace eescreen;

int main() {
    ScenarioConfig cfg;
    cfg.n = 200;
    cfg.p = 2000;
    cfg.rho = 0.5;
    cfg.error_dist = ErrorDist::standard_normal;
    cfg.base_seed = 42;

    const auto truth = default_truth();
    const auto cal = calibrate_scenario(cfg, truth);
    const auto raw = gen_covariates(cfg, 0);
    const auto s = gen_outcomes(raw, truth, cfg, cal.censoring.lambda, 0);
    const auto x = standardize(raw);

    ModelSpec aft{ModelKind::aft_gehan, std::nullopt, Side::left_limit};
    const auto stats = screening_stats(aft, x, s);
    const auto kept = eescreen::eescreen(stats, RetentionRule::top_d(default_top_d(cfg.n)));
    std::printf("censoring %.2f, kept %zu of %zu, minimum model size %zu\n", cal.censoring.realized,
                kept.indices.size(), x.p(), minimum_model_size(stats, truth));

    const auto sub = x.select_columns(kept.indices);
    const auto path = eeboost(aft, sub, s, {0.01, 6000, 1});
    const auto tuned = gcv_tune(path, sub, s, GcvCriterion::gehan);
    SparseCoefs beta;
    for (const auto& [j, b] : tuned.beta) beta[kept.indices[j]] = b;
    std::printf("EEBoost: t* = %zu of %zu, %zu nonzero, MSE %.3f\n", tuned.t_star, path.iterations(), beta.size(),
                mse(beta, truth));

    // Independent test sample, standardized with the training transform.
    const auto traw = gen_covariates(cfg, 0, StreamTag::test_covariates);
    const auto ts = gen_outcomes(traw, truth, cfg, cal.censoring.lambda, 0, StreamTag::test_errors,
                                 StreamTag::test_censoring);
    const auto tx = apply_standardization(traw, x.col_means(), x.col_scales());
    RiskScores risk{linear_predictor(tx, beta, 0.0)};
    for (auto& r : risk.scores) r = -r;
    std::printf("test C-statistic %.3f\n", c_statistic(risk, ts, default_tau(ts), km_censoring(ts)));
}
