#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>

namespace feetiming {

template <class WinFn>
StrategyDecision maximize_fee(const Scenario& scenario, WinFn&& win, std::vector<double> breaks,
                              const OptimizerOptions& options) {
    const double v = scenario.valuation;
    const bool right_continuous = scenario.tie_rule == TieRule::StrategicWins;

    std::erase_if(breaks, [v](double x) { return !(x > 0.0 && x < v); });
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    struct Point {
        double b;
        double w;
        double r;
    };
    std::vector<Point> seen;
    auto eval = [&](double b) {
        b = std::clamp(b, 0.0, v);
        const double w = win(b);
        seen.push_back({b, w, (v - b) * w});
        return seen.back().r;
    };

    const int n = std::max(options.grid_points, 2);
    const double h = v / static_cast<double>(n - 1);
    for (int i = 0; i < n; ++i) eval(i == n - 1 ? v : h * static_cast<double>(i));
    for (double x : breaks) eval(right_continuous ? x : std::min(x + scenario.tick, v));

    auto better = [](const Point& a, const Point& b) { return a.r > b.r || (a.r == b.r && a.b < b.b); };

    std::vector<Point> coarse = seen;
    std::sort(coarse.begin(), coarse.end(), better);
    const int top = std::min<int>(options.refine_top, static_cast<int>(coarse.size()));

    for (int t = 0; t < top; ++t) {
        const double c = coarse[static_cast<std::size_t>(t)].b;
        // continuity piece holding c
        double lo = 0.0;
        double hi = v;
        if (right_continuous) {
            auto it = std::upper_bound(breaks.begin(), breaks.end(), c);
            if (it != breaks.end()) hi = std::nextafter(*it, 0.0);
            if (it != breaks.begin()) lo = *std::prev(it);
        } else {
            auto it = std::lower_bound(breaks.begin(), breaks.end(), c);
            if (it != breaks.end()) hi = *it;
            if (it != breaks.begin()) lo = std::min(*std::prev(it) + scenario.tick, hi);
        }
        double a = std::max(lo, c - h);
        double z = std::min(hi, c + h);
        if (!(z > a)) continue;

        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = z - g * (z - a);
        double x2 = a + g * (z - a);
        double f1 = eval(x1);
        double f2 = eval(x2);
        const double tol = 1e-12 * std::max(1.0, v);
        for (int it = 0; it < 200 && z - a > tol; ++it) {
            if (f1 >= f2) {
                z = x2;
                x2 = x1;
                f2 = f1;
                x1 = z - g * (z - a);
                f1 = eval(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (z - a);
                f2 = eval(x2);
            }
        }
    }

    const Point best = *std::min_element(seen.begin(), seen.end(), better);
    StrategyDecision d;
    d.fee = best.b;
    d.expected_utility = best.r;
    d.inclusion_probability = best.w;
    return d;
}

}  // namespace feetiming
