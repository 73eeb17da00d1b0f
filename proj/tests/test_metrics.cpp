#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "eescreen/metrics.hpp"
#include "oracles.hpp"

using namespace eescreen;

namespace {

SurvivalSample uncensored(std::vector<double> y) {
    return {y, std::vector<int>(y.size(), 1), {}};
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an eescreen::Error";
    return ErrorKind::io;
}

TrueModel reference_beta0() {
    TrueModel t;
    for (std::size_t j = 0; j < 10; ++j) t.beta0[j] = 1.5;
    for (std::size_t j = 10; j < 20; ++j) t.beta0[j] = -0.8;
    return t;
}

}  // namespace

TEST(Brier, PerfectPredictionScoresZero) {
    auto s = uncensored({1, 2, 3, 4, 5});
    const double t0 = 2.5;
    std::vector<double> pi;
    for (double y : s.y) pi.push_back(y >= t0 ? 1.0 : 0.0);
    EXPECT_EQ(brier(pi, s, t0, km_censoring(s)), 0.0);
}

TEST(Brier, ConstantHalfScoresQuarter) {
    auto s = uncensored({1, 2, 3, 4, 5});
    std::vector<double> pi(5, 0.5);
    EXPECT_DOUBLE_EQ(brier(pi, s, 2.5, km_censoring(s)), 0.25);
}

TEST(Brier, CensoredHandFixture) {
    // Y = 1..4, delta = 0,1,0,1, t0 = 3. Left-limit censoring survival is
    // 3/4 at Y = 2 and at t0. Subject 1 is censored before t0 and drops out.
    SurvivalSample s{{1, 2, 3, 4}, {0, 1, 0, 1}, {}};
    std::vector<double> pi{0.9, 0.2, 0.6, 0.7};
    const double expect = (0.04 / 0.75 + 0.16 / 0.75 + 0.09 / 0.75) / 4.0;
    EXPECT_NEAR(brier(pi, s, 3.0, km_censoring(s)), expect, 1e-15);
}

TEST(Brier, UncensoredReducesToSquaredError) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u;
    for (int rep = 0; rep < 20; ++rep) {
        auto s = oracle::random_survival(30, rng);
        std::fill(s.delta.begin(), s.delta.end(), 1);
        std::vector<double> pi(30);
        for (auto& v : pi) v = u(rng);
        const double t0 = quantile(s.y, 0.5);
        double se = 0;
        for (std::size_t i = 0; i < 30; ++i) {
            const double o = s.y[i] >= t0 ? 1.0 : 0.0;
            se += (o - pi[i]) * (o - pi[i]);
        }
        // Subjects with Y = t0 exactly count in both terms under the formula.
        double overlap = 0;
        for (std::size_t i = 0; i < 30; ++i) {
            if (s.y[i] == t0) overlap += pi[i] * pi[i];
        }
        EXPECT_NEAR(brier(pi, s, t0, km_censoring(s)), (se + overlap) / 30.0, 1e-12);
    }
}

TEST(Brier, RejectsOutOfRangePredictions) {
    auto s = uncensored({1, 2});
    EXPECT_THROW(brier(std::vector<double>{0.5, 1.5}, s, 1.5, km_censoring(s)), Error);
}

TEST(Auc, PerfectSeparation) {
    auto s = uncensored({1, 2, 3, 4, 5, 6});
    RiskScores r{{6, 5, 4, 3, 2, 1}};
    EXPECT_DOUBLE_EQ(ipcw_auc(r, s, 3.5, km_censoring(s)), 1.0);
}

TEST(Auc, AllTiedRisksGiveHalf) {
    SurvivalSample s{{1, 2, 3, 4, 5, 6}, {1, 0, 1, 1, 0, 1}, {}};
    RiskScores r{std::vector<double>(6, 0.3)};
    EXPECT_DOUBLE_EQ(ipcw_auc(r, s, 3.5, km_censoring(s)), 0.5);
}

TEST(Auc, RandomRiskNearHalf) {
    std::mt19937_64 rng(2);
    auto s = oracle::random_survival(500, rng, false);
    std::normal_distribution<double> z;
    RiskScores r{std::vector<double>(500)};
    for (auto& v : r.scores) v = z(rng);
    EXPECT_NEAR(ipcw_auc(r, s, quantile(s.y, 0.4), km_censoring(s)), 0.5, 0.05);
}

TEST(Auc, MissingCasesOrControls) {
    auto s = uncensored({1, 2, 3});
    RiskScores r{{1, 2, 3}};
    EXPECT_EQ(kind_of([&] { ipcw_auc(r, s, 0.5, km_censoring(s)); }), ErrorKind::no_cases);
    EXPECT_EQ(kind_of([&] { ipcw_auc(r, s, 3.0, km_censoring(s)); }), ErrorKind::no_controls);
}

TEST(CStatistic, PerfectMonotoneRisk) {
    auto s = uncensored({1, 2, 3, 4, 5});
    RiskScores r{{10, 8, 6, 4, 2}};
    EXPECT_DOUBLE_EQ(c_statistic(r, s, std::numeric_limits<double>::infinity(), km_censoring(s)), 1.0);
}

TEST(CStatistic, SingleComparablePair) {
    SurvivalSample s{{1, 2}, {1, 0}, {}};
    EXPECT_DOUBLE_EQ(c_statistic(RiskScores{{2, 1}}, s, 10, km_censoring(s)), 1.0);
    EXPECT_DOUBLE_EQ(c_statistic(RiskScores{{1, 2}}, s, 10, km_censoring(s)), 0.0);
}

TEST(CStatistic, RandomRiskNearHalf) {
    std::mt19937_64 rng(3);
    auto s = oracle::random_survival(500, rng, false);
    std::normal_distribution<double> z;
    RiskScores r{std::vector<double>(500)};
    for (auto& v : r.scores) v = z(rng);
    EXPECT_NEAR(c_statistic(r, s, default_tau(s), km_censoring(s)), 0.5, 0.05);
}

TEST(CStatistic, NoComparablePairs) {
    SurvivalSample s{{1, 1}, {1, 1}, {}};
    EXPECT_EQ(kind_of([&] { c_statistic(RiskScores{{1, 2}}, s, 10, km_censoring(s)); }),
              ErrorKind::no_comparable_pairs);
}

TEST(Discrimination, InvariantToMonotoneRiskTransform) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 10; ++rep) {
        auto s = oracle::random_survival(80, rng);
        RiskScores r{std::vector<double>(80)};
        for (auto& v : r.scores) v = std::round(z(rng) * 4) / 4;  // with ties
        RiskScores m = r;
        for (auto& v : m.scores) v = std::exp(v) + v * v * v;
        const auto sc = km_censoring(s);
        const double t0 = quantile(s.y, 0.4);
        EXPECT_DOUBLE_EQ(ipcw_auc(r, s, t0, sc), ipcw_auc(m, s, t0, sc));
        EXPECT_DOUBLE_EQ(c_statistic(r, s, default_tau(s), sc), c_statistic(m, s, default_tau(s), sc));
    }
}

TEST(Metrics, PermutationEquivariant) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u;
    auto s = oracle::random_survival(60, rng);
    RiskScores r{std::vector<double>(60)};
    std::vector<double> pi(60);
    for (std::size_t i = 0; i < 60; ++i) {
        r.scores[i] = z(rng);
        pi[i] = u(rng);
    }
    std::vector<std::size_t> perm(60);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    SurvivalSample sp;
    RiskScores rp;
    std::vector<double> pip;
    for (auto k : perm) {
        sp.y.push_back(s.y[k]);
        sp.delta.push_back(s.delta[k]);
        rp.scores.push_back(r.scores[k]);
        pip.push_back(pi[k]);
    }
    const double t0 = quantile(s.y, 0.4);
    const auto sc = km_censoring(s);
    const auto scp = km_censoring(sp);
    EXPECT_NEAR(brier(pi, s, t0, sc), brier(pip, sp, t0, scp), 1e-12);
    EXPECT_NEAR(ipcw_auc(r, s, t0, sc), ipcw_auc(rp, sp, t0, scp), 1e-12);
    EXPECT_NEAR(c_statistic(r, s, default_tau(s), sc), c_statistic(rp, sp, default_tau(sp), scp), 1e-12);
}

TEST(Mse, Examples) {
    const auto t = reference_beta0();
    EXPECT_EQ(mse(t.beta0, t), 0.0);
    EXPECT_NEAR(mse(SparseCoefs{}, t), 28.9, 1e-12);
    EXPECT_NEAR(mse(SparseCoefs{{3, 0.3}}, SparseCoefs{}), 0.09, 1e-15);
    auto off = t.beta0;
    off[0] = 1.2;
    EXPECT_NEAR(mse(off, t), 0.09, 1e-12);
}
