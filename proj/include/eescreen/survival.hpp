#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "eescreen/data.hpp"

namespace eescreen {

enum class Side { right_limit, left_limit };

/// Right-continuous, nonincreasing step function starting at 1.
/// values[k] holds the level on [knots[k], knots[k+1]).
struct StepFunction {
    std::vector<double> knots;
    std::vector<double> values;
    double value_at_zero = 1.0;

    double eval(double t, Side side = Side::right_limit) const {
        // number of knots <= t (right limit) or < t (left limit)
        const auto it = side == Side::right_limit
                            ? std::upper_bound(knots.begin(), knots.end(), t)
                            : std::lower_bound(knots.begin(), knots.end(), t);
        const auto k = static_cast<std::size_t>(it - knots.begin());
        return k == 0 ? value_at_zero : values[k - 1];
    }
};

inline double eval_step(const StepFunction& f, double t, Side side) { return f.eval(t, side); }

/// Product-limit estimate of the censoring survival function: the roles of
/// events and censorings are swapped. At a tied time, events leave the risk
/// set before the censorings there are counted.
inline StepFunction km_censoring(const SurvivalSample& s) {
    const std::size_t n = s.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return s.y[a] < s.y[b]; });

    StepFunction f;
    double surv = 1.0;
    std::size_t at_risk = n;
    for (std::size_t k = 0; k < n;) {
        const double t = s.y[order[k]];
        std::size_t events = 0, censored = 0;
        while (k < n && s.y[order[k]] == t) {
            (s.delta[order[k]] == 1 ? events : censored) += 1;
            ++k;
        }
        if (censored > 0) {
            const auto r = static_cast<double>(at_risk - events);
            surv *= 1.0 - static_cast<double>(censored) / r;
            f.knots.push_back(t);
            f.values.push_back(surv);
        }
        at_risk -= events + censored;
    }
    return f;
}

inline constexpr double kWeightFloor = 1e-10;

/// IPCW denominator: S_C evaluated on the requested side, floored at
/// kWeightFloor. Each floor hit bumps `clamped`.
inline double censoring_denominator(const StepFunction& sc, double t, Side side,
                                    std::size_t& clamped) {
    const double v = sc.eval(t, side);
    if (v < kWeightFloor) {
        ++clamped;
        return kWeightFloor;
    }
    return v;
}

}  // namespace eescreen
