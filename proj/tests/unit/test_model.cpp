#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "feetiming/errors.hpp"
#include "feetiming/model.hpp"

using namespace feetiming;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("interval cdf", "[model]") {
    const auto exp01 = BlockIntervalModel::exponential(0.1);
    CHECK_THAT(interval_cdf(exp01, 10.0), WithinAbs(1.0 - std::exp(-1.0), 1e-15));
    CHECK(interval_cdf(exp01, 0.0) == 0.0);
    CHECK(exp01.mean() == 10.0);

    const auto fixed12 = BlockIntervalModel::fixed(12.0);
    CHECK(interval_cdf(fixed12, 11.9) == 0.0);
    CHECK(interval_cdf(fixed12, 12.0) == 1.0);
    CHECK(interval_cdf(fixed12, 30.0) == 1.0);

    CHECK_THROWS_AS(interval_cdf(exp01, -1.0), DomainError);
    CHECK_THROWS_AS(BlockIntervalModel::exponential(0.0), ConfigError);
    CHECK_THROWS_AS(BlockIntervalModel::fixed(-2.0), ConfigError);
}

TEST_CASE("residual interval cdf", "[model]") {
    const auto exp01 = BlockIntervalModel::exponential(0.1);
    CHECK_THAT(residual_interval_cdf(exp01, 5.0, 15.0), WithinAbs(1.0 - std::exp(-1.0), 1e-15));
    CHECK(residual_interval_cdf(exp01, 7.0, 7.0) == 0.0);
    CHECK(residual_interval_cdf(BlockIntervalModel::fixed(12.0), 3.0, 12.0) == 1.0);
    CHECK(residual_interval_cdf(BlockIntervalModel::fixed(12.0), 3.0, 11.0) == 0.0);
    CHECK_THROWS_AS(residual_interval_cdf(BlockIntervalModel::fixed(12.0), 12.0, 13.0), InvalidStateError);
    CHECK_THROWS_AS(residual_interval_cdf(exp01, 5.0, 4.0), DomainError);

    SECTION("memoryless") {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(0.0, 50.0);
        for (int i = 0; i < 1000; ++i) {
            const double ts = u(rng);
            const double d = u(rng);
            const auto model = BlockIntervalModel::exponential(0.01 + u(rng) / 10.0);
            CHECK_THAT(residual_interval_cdf(model, ts, ts + d), WithinAbs(interval_cdf(model, d), 1e-12));
        }
    }
}

TEST_CASE("arrival counts", "[model]") {
    CHECK(arrival_count_pmf(ArrivalProcess::poisson(40.0), 0.0, 0) == 1.0);
    CHECK(arrival_count_pmf(ArrivalProcess::linear(40.0), 0.5, 20) == 1.0);
    CHECK(arrival_count_pmf(ArrivalProcess::linear(40.0), 0.5, 19) == 0.0);
    CHECK_THAT(arrival_count_pmf(ArrivalProcess::poisson(2.0), 1.0, 2), WithinRel(2.0 * std::exp(-2.0), 1e-13));
    CHECK(linear_arrival_count(100.0, 0.29) == 29);
    CHECK(linear_arrival_count(40.0, 0.0249) == 0);

    double total = 0.0;
    for (int n = 0; n < 2000; ++n) total += arrival_count_pmf(ArrivalProcess::poisson(40.0), 10.0, n);
    CHECK_THAT(total, WithinAbs(1.0, 1e-9));
    CHECK_THROWS_AS(arrival_count_pmf(ArrivalProcess::poisson(1.0), -1.0, 0), DomainError);
}

TEST_CASE("fee distributions", "[model]") {
    const auto pareto = FeeDistribution::pareto(1.0, 5.9512);
    CHECK(pareto.cdf(1.0) == 0.0);
    CHECK(pareto.cdf(0.5) == 0.0);
    CHECK_THAT(pareto.pareto_shape(), WithinRel(5.9512 / 4.9512, 1e-15));
    // mean identity min * shape / (shape - 1)
    const double a = pareto.pareto_shape();
    CHECK_THAT(a / (a - 1.0), WithinRel(5.9512, 1e-12));

    const auto uni = FeeDistribution::uniform(0.0, 1.0);
    CHECK(uni.cdf(0.25) == 0.25);
    CHECK_THROWS_AS(uni.quantile(1.5), DomainError);
    CHECK_THROWS_AS(FeeDistribution::pareto(1.0, 1.0), ConfigError);
    CHECK_THROWS_AS(FeeDistribution::empirical({}), ConfigError);

    SECTION("quantile round trip") {
        for (int i = 1; i < 1000; ++i) {
            const double p = i / 1000.0;
            CHECK_THAT(pareto.cdf(pareto.quantile(p)), WithinAbs(p, 1e-9));
            CHECK_THAT(uni.cdf(uni.quantile(p)), WithinAbs(p, 1e-9));
        }
    }

    SECTION("Pareto sample moments") {
        // the Pareto variance is infinite for shape < 2, so the check uses
        // the capped mean E[min(X, c)] = 1 + (c^(1-a) - 1) / (1 - a)
        const double cap = 100.0;
        const double expected = 1.0 + (std::pow(cap, 1.0 - a) - 1.0) / (1.0 - a);
        Rng rng = make_stream(42, 0);
        const int n = 1000000;
        double s = 0.0;
        double s2 = 0.0;
        double below_median = 0.0;
        const double median = pareto.quantile(0.5);
        for (int i = 0; i < n; ++i) {
            const double x = pareto.sample(rng);
            REQUIRE(x >= 1.0);
            const double c = std::min(x, cap);
            s += c;
            s2 += c * c;
            below_median += x <= median ? 1.0 : 0.0;
        }
        const double mean = s / n;
        const double se = std::sqrt((s2 / n - mean * mean) / n);
        CHECK(std::abs(mean - expected) < 3.0 * se);
        CHECK(std::abs(below_median / n - 0.5) < 3.0 * std::sqrt(0.25 / n));
    }

    SECTION("empirical step law") {
        const auto emp = FeeDistribution::empirical({3.0, 1.0, 2.0, 2.0});
        CHECK(emp.cdf(0.5) == 0.0);
        CHECK(emp.cdf(1.0) == 0.25);
        CHECK(emp.cdf(2.0) == 0.75);
        CHECK(emp.cdf_below(2.0) == 0.25);
        CHECK(emp.cdf(3.0) == 1.0);
        CHECK(emp.quantile(0.25) == 1.0);
        CHECK(emp.quantile(0.26) == 2.0);
        CHECK(emp.quantile(0.75) == 2.0);
        CHECK(emp.quantile(1.0) == 3.0);
        CHECK(emp.mean() == 2.0);
    }
}

TEST_CASE("mempool counting", "[model]") {
    CHECK(count_above({{3, 1, 4}, 0.0}, 2.0) == 2);
    CHECK(count_above({{}, 0.0}, 2.0) == 0);
    CHECK(count_above({{2, 2, 5}, 0.0}, 2.0) == 1);
    CHECK(count_competing({{2, 2, 5}, 0.0}, 2.0, TieRule::StrategicLoses) == 3);
    CHECK(threshold_fee({{5, 3, 8}, 0.0}, 2) == 5.0);
    CHECK(threshold_fee({{5}, 0.0}, 3) == 0.0);
    CHECK(threshold_fee({{7, 7, 2}, 0.0}, 2) == 7.0);

    SECTION("threshold against brute-force sort") {
        Rng rng = make_stream(3, 0);
        for (int trial = 0; trial < 300; ++trial) {
            MempoolSnapshot pool;
            const int size = static_cast<int>(uniform01(rng) * 1000.0);
            for (int i = 0; i < size; ++i) pool.pending_fees.push_back(std::floor(uniform01(rng) * 50.0));
            std::vector<double> sorted = pool.pending_fees;
            std::sort(sorted.begin(), sorted.end(), std::greater<>());
            const SortedFees view(pool.pending_fees);
            for (int m = 1; m <= 30; ++m) {
                const double th = threshold_fee(pool, m);
                CHECK(th == (size >= m ? sorted[static_cast<std::size_t>(m - 1)] : 0.0));
                if (m > 1) CHECK(th <= threshold_fee(pool, m - 1));
                CHECK(count_above(pool, th) <= m - 1);
                if (size >= m) CHECK(count_above(pool, std::nextafter(th, -1.0)) >= m);
                CHECK(view.count_above(th) == count_above(pool, th));
            }
        }
    }
}

TEST_CASE("scenario validation", "[model]") {
    Scenario s;
    s.fees = FeeDistribution::uniform(0.0, 1.0);
    s.valuation = 2.0;
    CHECK_NOTHROW(s.validate());
    s.tick = 1e-3;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.tick = 1e-8;
    s.capacity = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.capacity = 1;
    CHECK(s.beat_probability(0.25) == 0.75);
    CHECK_THROWS_AS(MempoolSnapshot({{-1.0}, 0.0}).validate(), DomainError);
}
