#pragma once

// Environment model: block-interval law, arrival process, fee distribution,
// scenario and mempool state, plus the primitive probabilities every
// strategy evaluator is built from.

#include <cstdint>
#include <span>
#include <vector>

#include "feetiming/rng.hpp"

namespace feetiming {

class BlockIntervalModel {
public:
    enum class Kind : std::uint8_t { Exponential, Fixed };

    BlockIntervalModel() = default;

    /// Memoryless interval with the given block rate (mean 1/rate).
    static BlockIntervalModel exponential(double rate);
    /// Deterministic interval of the given length.
    static BlockIntervalModel fixed(double duration);

    Kind kind() const noexcept { return kind_; }
    bool is_exponential() const noexcept { return kind_ == Kind::Exponential; }
    bool is_fixed() const noexcept { return kind_ == Kind::Fixed; }

    /// Block rate; throws ConfigError for a fixed interval.
    double rate() const;
    /// Interval length; throws ConfigError for an exponential interval.
    double duration() const;
    double mean() const noexcept;

    bool operator==(const BlockIntervalModel&) const = default;

private:
    BlockIntervalModel(Kind kind, double param) : kind_(kind), param_(param) {}

    Kind kind_ = Kind::Exponential;
    double param_ = 1.0;
};

/// G(t) = P(T <= t).
double interval_cdf(const BlockIntervalModel& model, double t);

/// P(T <= t | T > elapsed).
double residual_interval_cdf(const BlockIntervalModel& model, double elapsed, double t);

class ArrivalProcess {
public:
    enum class Kind : std::uint8_t { Linear, Poisson };

    ArrivalProcess() = default;

    /// Deterministic stream: the j-th transaction arrives at time j / rate.
    static ArrivalProcess linear(double rate);
    static ArrivalProcess poisson(double rate);

    Kind kind() const noexcept { return kind_; }
    bool is_linear() const noexcept { return kind_ == Kind::Linear; }
    double rate() const noexcept { return rate_; }

    bool operator==(const ArrivalProcess&) const = default;

private:
    ArrivalProcess(Kind kind, double rate) : kind_(kind), rate_(rate) {}

    Kind kind_ = Kind::Poisson;
    double rate_ = 0.0;
};

/// floor(rate * window), tolerant to representation error in the product
/// (0.29 * 100 counts 29 arrivals, not 28).
std::int64_t linear_arrival_count(double rate, double window);

double arrival_count_pmf(const ArrivalProcess& process, double window, std::int64_t n);

class FeeDistribution {
public:
    enum class Kind : std::uint8_t { Pareto, Uniform, Empirical };

    FeeDistribution() = default;

    /// Pareto law fixed by its minimum and mean; shape = mean / (mean - min).
    static FeeDistribution pareto(double min, double mean);
    static FeeDistribution uniform(double lo, double hi);
    /// Right-continuous step law of the sample (point mass when size 1).
    static FeeDistribution empirical(std::vector<double> sample);

    Kind kind() const noexcept { return kind_; }

    /// P(X <= b).
    double cdf(double b) const;
    /// P(X < b).
    double cdf_below(double b) const;
    /// Generalized inverse inf{x : cdf(x) >= p}.
    double quantile(double p) const;
    double sample(Rng& rng) const;

    double mean() const;
    double support_min() const;
    /// +infinity for Pareto.
    double support_max() const;

    double pareto_min() const { return a_; }
    double pareto_mean() const { return b_; }
    double pareto_shape() const { return shape_; }
    double uniform_lo() const { return a_; }
    double uniform_hi() const { return b_; }
    std::span<const double> samples() const { return sample_; }

    /// Points in the open interval (lo, hi) where the CDF jumps or has a kink.
    std::vector<double> breakpoints(double lo, double hi) const;

    bool is_continuous() const noexcept { return kind_ != Kind::Empirical; }

    bool operator==(const FeeDistribution&) const = default;

private:
    Kind kind_ = Kind::Uniform;
    double a_ = 0.0;  // Pareto min / Uniform lo
    double b_ = 1.0;  // Pareto mean / Uniform hi
    double shape_ = 0.0;
    std::vector<double> sample_;  // sorted, Empirical only
};

double fee_cdf(const FeeDistribution& dist, double b);
double fee_quantile(const FeeDistribution& dist, double p);
double fee_sample(const FeeDistribution& dist, Rng& rng);

/// Who wins when the strategic fee equals a competing fee.
enum class TieRule : std::uint8_t {
    StrategicWins,   // strategic user is treated as the latest arrival
    StrategicLoses,
};

struct Scenario {
    BlockIntervalModel interval;
    ArrivalProcess arrivals;
    FeeDistribution fees;
    int capacity = 1;         // m, transactions per block
    double valuation = 1.0;   // V
    double tick = 1e-8;       // smallest currency unit
    TieRule tie_rule = TieRule::StrategicWins;

    /// Throws ConfigError on violated invariants. The tick must not exceed
    /// valuation * max_tick_ratio.
    void validate(double max_tick_ratio = 1e-6) const;

    /// Probability that a single ordinary fee outranks strategic fee b.
    double beat_probability(double b) const;

    bool operator==(const Scenario&) const = default;
};

struct MempoolSnapshot {
    std::vector<double> pending_fees;
    double elapsed = 0.0;  // time since the last block

    void validate() const;
};

/// |{x in pool : x > b}|.
std::int64_t count_above(const MempoolSnapshot& pool, double b);

/// Pending fees that outrank strategic fee b under the tie rule.
std::int64_t count_competing(const MempoolSnapshot& pool, double b, TieRule rule);

/// m-th largest pending fee, 0 when fewer than m are pending.
double threshold_fee(const MempoolSnapshot& pool, int m);

/// Sorted view of a fee multiset for repeated rank queries.
class SortedFees {
public:
    SortedFees() = default;
    explicit SortedFees(std::span<const double> fees);

    std::int64_t count_above(double b) const;
    std::int64_t count_at_or_above(double b) const;
    std::int64_t count_competing(double b, TieRule rule) const {
        return rule == TieRule::StrategicWins ? count_above(b) : count_at_or_above(b);
    }
    std::int64_t size() const { return static_cast<std::int64_t>(fees_.size()); }
    std::span<const double> ascending() const { return fees_; }

private:
    std::vector<double> fees_;
};

}  // namespace feetiming
