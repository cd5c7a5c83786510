#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "feetiming/model.hpp"

namespace feetiming {

/// Truncation threshold for every infinite count sum.
inline constexpr double kTailTolerance = 1e-10;

/// Distribution of a transaction count, stored as a pmf over
/// [offset, offset + size). Infinite laws are cut where the remaining tail
/// mass falls below kTailTolerance and then renormalized.
class CountLaw {
public:
    CountLaw() : pmf_{1.0} {}

    static CountLaw point(std::int64_t n);
    static CountLaw poisson(double mean);
    /// P(N = n) = (1 - q) q^n.
    static CountLaw geometric(double q);
    static CountLaw binomial(std::int64_t n, double p);
    /// Law with P(N >= j) = survival[j - 1] for j >= 1 (survival nonincreasing).
    static CountLaw from_survival(std::span<const double> survival);

    CountLaw convolve(const CountLaw& other) const;
    CountLaw shifted(std::int64_t by) const;

    std::int64_t min_count() const noexcept { return offset_; }
    std::int64_t max_count() const noexcept {
        return offset_ + static_cast<std::int64_t>(pmf_.size()) - 1;
    }
    double probability(std::int64_t n) const;
    std::span<const double> pmf() const noexcept { return pmf_; }
    double mean() const;

private:
    CountLaw(std::int64_t offset, std::vector<double> pmf);

    std::int64_t offset_ = 0;
    std::vector<double> pmf_;
};

/// Arrivals in [0, elapsed].
CountLaw past_arrivals(const ArrivalProcess& arrivals, double elapsed);

/// Arrivals in (elapsed, T] given that no block came by `elapsed`.
CountLaw future_arrivals(const BlockIntervalModel& interval, const ArrivalProcess& arrivals,
                         double elapsed);

/// Arrivals in [0, T] given that no block came by `elapsed`.
CountLaw round_arrivals(const BlockIntervalModel& interval, const ArrivalProcess& arrivals,
                        double elapsed);

/// Arrivals in the deterministic window (from, to].
CountLaw window_arrivals(const ArrivalProcess& arrivals, double from, double to);

/// Probability that at most slots - 1 competitors outrank the strategic fee,
/// when the competitor count follows `law` and each one outranks it
/// independently with probability `beat`:
///   sum_n P(N = n) * P(Binomial(n, beat) <= slots - 1).
/// Zero when slots <= 0.
double competition_success(const CountLaw& law, double beat, std::int64_t slots);

/// Complement of competition_success, summed from the upper tail so that
/// tiny failure probabilities keep their relative accuracy.
double competition_failure(const CountLaw& law, double beat, std::int64_t slots);

/// P(Binomial(n, p) <= k) by direct summation of the pmf.
double binomial_cdf(std::int64_t n, double p, std::int64_t k);

}  // namespace feetiming
