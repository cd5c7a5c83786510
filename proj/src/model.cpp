#include "feetiming/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "feetiming/errors.hpp"

namespace feetiming {

namespace {

void require_finite(double x, const char* what) {
    if (!std::isfinite(x)) throw ConfigError(std::string(what) + " must be finite");
}

}  // namespace

// ---------------------------------------------------------------------------
// Block interval
// ---------------------------------------------------------------------------

BlockIntervalModel BlockIntervalModel::exponential(double rate) {
    require_finite(rate, "block rate");
    if (rate <= 0.0) throw ConfigError("block rate must be positive");
    return {Kind::Exponential, rate};
}

BlockIntervalModel BlockIntervalModel::fixed(double duration) {
    require_finite(duration, "block interval");
    if (duration <= 0.0) throw ConfigError("block interval must be positive");
    return {Kind::Fixed, duration};
}

double BlockIntervalModel::rate() const {
    if (kind_ != Kind::Exponential) throw ConfigError("fixed block interval has no rate");
    return param_;
}

double BlockIntervalModel::duration() const {
    if (kind_ != Kind::Fixed) throw ConfigError("exponential block interval has no fixed duration");
    return param_;
}

double BlockIntervalModel::mean() const noexcept {
    return kind_ == Kind::Exponential ? 1.0 / param_ : param_;
}

double interval_cdf(const BlockIntervalModel& model, double t) {
    if (!(t >= 0.0)) throw DomainError("interval_cdf: t must be nonnegative");
    if (model.is_exponential()) return -std::expm1(-model.rate() * t);
    return t < model.duration() ? 0.0 : 1.0;
}

double residual_interval_cdf(const BlockIntervalModel& model, double elapsed, double t) {
    if (!(elapsed >= 0.0)) throw DomainError("residual_interval_cdf: elapsed must be nonnegative");
    if (!(t >= elapsed)) throw DomainError("residual_interval_cdf: t must not precede elapsed");
    if (model.is_exponential()) return -std::expm1(-model.rate() * (t - elapsed));
    if (elapsed >= model.duration()) {
        throw InvalidStateError("residual_interval_cdf: fixed-interval block already due");
    }
    return t < model.duration() ? 0.0 : 1.0;
}

// ---------------------------------------------------------------------------
// Arrivals
// ---------------------------------------------------------------------------

ArrivalProcess ArrivalProcess::linear(double rate) {
    require_finite(rate, "arrival rate");
    if (rate < 0.0) throw ConfigError("arrival rate must be nonnegative");
    return {Kind::Linear, rate};
}

ArrivalProcess ArrivalProcess::poisson(double rate) {
    require_finite(rate, "arrival rate");
    if (rate < 0.0) throw ConfigError("arrival rate must be nonnegative");
    return {Kind::Poisson, rate};
}

std::int64_t linear_arrival_count(double rate, double window) {
    const double x = rate * window;
    const double nearest = std::round(x);
    if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, std::abs(x))) {
        return static_cast<std::int64_t>(nearest);
    }
    return static_cast<std::int64_t>(std::floor(x));
}

double arrival_count_pmf(const ArrivalProcess& process, double window, std::int64_t n) {
    if (!(window >= 0.0)) throw DomainError("arrival_count_pmf: window must be nonnegative");
    if (n < 0) throw DomainError("arrival_count_pmf: count must be nonnegative");
    if (process.is_linear()) return linear_arrival_count(process.rate(), window) == n ? 1.0 : 0.0;
    const double mu = process.rate() * window;
    if (mu == 0.0) return n == 0 ? 1.0 : 0.0;
    const double nn = static_cast<double>(n);
    return std::exp(nn * std::log(mu) - mu - std::lgamma(nn + 1.0));
}

// ---------------------------------------------------------------------------
// Fees
// ---------------------------------------------------------------------------

FeeDistribution FeeDistribution::pareto(double min, double mean) {
    require_finite(min, "Pareto minimum");
    require_finite(mean, "Pareto mean");
    if (min <= 0.0) throw ConfigError("Pareto minimum must be positive");
    if (!(mean > min)) throw ConfigError("Pareto mean must exceed its minimum");
    FeeDistribution d;
    d.kind_ = Kind::Pareto;
    d.a_ = min;
    d.b_ = mean;
    d.shape_ = mean / (mean - min);
    return d;
}

FeeDistribution FeeDistribution::uniform(double lo, double hi) {
    require_finite(lo, "uniform lower bound");
    require_finite(hi, "uniform upper bound");
    if (lo < 0.0) throw ConfigError("fees must be nonnegative");
    if (!(hi > lo)) throw ConfigError("uniform upper bound must exceed lower bound");
    FeeDistribution d;
    d.kind_ = Kind::Uniform;
    d.a_ = lo;
    d.b_ = hi;
    return d;
}

FeeDistribution FeeDistribution::empirical(std::vector<double> sample) {
    if (sample.empty()) throw ConfigError("empirical fee sample is empty");
    for (double x : sample) {
        require_finite(x, "empirical fee");
        if (x < 0.0) throw ConfigError("fees must be nonnegative");
    }
    std::sort(sample.begin(), sample.end());
    FeeDistribution d;
    d.kind_ = Kind::Empirical;
    d.a_ = sample.front();
    d.b_ = sample.back();
    d.sample_ = std::move(sample);
    return d;
}

double FeeDistribution::cdf(double b) const {
    switch (kind_) {
        case Kind::Pareto:
            return b < a_ ? 0.0 : -std::expm1(shape_ * std::log(a_ / b));
        case Kind::Uniform:
            if (b < a_) return 0.0;
            if (b >= b_) return 1.0;
            return (b - a_) / (b_ - a_);
        case Kind::Empirical: {
            const auto it = std::upper_bound(sample_.begin(), sample_.end(), b);
            return static_cast<double>(it - sample_.begin()) / static_cast<double>(sample_.size());
        }
    }
    return 0.0;
}

double FeeDistribution::cdf_below(double b) const {
    if (kind_ != Kind::Empirical) return cdf(b);
    const auto it = std::lower_bound(sample_.begin(), sample_.end(), b);
    return static_cast<double>(it - sample_.begin()) / static_cast<double>(sample_.size());
}

double FeeDistribution::quantile(double p) const {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("fee_quantile: p must lie in [0, 1]");
    switch (kind_) {
        case Kind::Pareto:
            if (p == 1.0) return std::numeric_limits<double>::infinity();
            return a_ * std::exp(-std::log1p(-p) / shape_);
        case Kind::Uniform:
            return a_ + p * (b_ - a_);
        case Kind::Empirical: {
            if (p == 0.0) return sample_.front();
            const double n = static_cast<double>(sample_.size());
            auto idx = static_cast<std::size_t>(std::ceil(p * n - 1e-12));
            idx = std::clamp<std::size_t>(idx, 1, sample_.size());
            return sample_[idx - 1];
        }
    }
    return 0.0;
}

double FeeDistribution::sample(Rng& rng) const {
    const double u = uniform01(rng);
    if (kind_ == Kind::Empirical) {
        const auto idx = static_cast<std::size_t>(u * static_cast<double>(sample_.size()));
        return sample_[std::min(idx, sample_.size() - 1)];
    }
    return quantile(u);
}

double FeeDistribution::mean() const {
    switch (kind_) {
        case Kind::Pareto: return b_;
        case Kind::Uniform: return 0.5 * (a_ + b_);
        case Kind::Empirical: {
            double s = 0.0;
            for (double x : sample_) s += x;
            return s / static_cast<double>(sample_.size());
        }
    }
    return 0.0;
}

double FeeDistribution::support_min() const { return a_; }

double FeeDistribution::support_max() const {
    return kind_ == Kind::Pareto ? std::numeric_limits<double>::infinity() : b_;
}

std::vector<double> FeeDistribution::breakpoints(double lo, double hi) const {
    std::vector<double> out;
    auto keep = [&](double x) {
        if (x > lo && x < hi) out.push_back(x);
    };
    switch (kind_) {
        case Kind::Pareto: keep(a_); break;
        case Kind::Uniform: keep(a_); keep(b_); break;
        case Kind::Empirical:
            for (double x : sample_) {
                if (out.empty() || out.back() != x) keep(x);
            }
            break;
    }
    return out;
}

double fee_cdf(const FeeDistribution& dist, double b) { return dist.cdf(b); }
double fee_quantile(const FeeDistribution& dist, double p) { return dist.quantile(p); }
double fee_sample(const FeeDistribution& dist, Rng& rng) { return dist.sample(rng); }

// ---------------------------------------------------------------------------
// Scenario and mempool
// ---------------------------------------------------------------------------

void Scenario::validate(double max_tick_ratio) const {
    if (capacity < 1) throw ConfigError("capacity must be at least 1");
    require_finite(valuation, "valuation");
    require_finite(tick, "tick");
    if (valuation <= 0.0) throw ConfigError("valuation must be positive");
    if (tick <= 0.0) throw ConfigError("tick must be positive");
    if (tick > valuation * max_tick_ratio) {
        throw ConfigError("tick must be negligible next to the valuation");
    }
}

double Scenario::beat_probability(double b) const {
    const double below = tie_rule == TieRule::StrategicWins ? fees.cdf(b) : fees.cdf_below(b);
    return std::clamp(1.0 - below, 0.0, 1.0);
}

void MempoolSnapshot::validate() const {
    if (!(elapsed >= 0.0)) throw DomainError("mempool elapsed time must be nonnegative");
    for (double x : pending_fees) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("pending fees must be finite and nonnegative");
    }
}

std::int64_t count_above(const MempoolSnapshot& pool, double b) {
    return std::count_if(pool.pending_fees.begin(), pool.pending_fees.end(),
                         [b](double x) { return x > b; });
}

std::int64_t count_competing(const MempoolSnapshot& pool, double b, TieRule rule) {
    if (rule == TieRule::StrategicWins) return count_above(pool, b);
    return std::count_if(pool.pending_fees.begin(), pool.pending_fees.end(),
                         [b](double x) { return x >= b; });
}

double threshold_fee(const MempoolSnapshot& pool, int m) {
    if (m < 1) throw DomainError("threshold_fee: capacity must be at least 1");
    if (pool.pending_fees.size() < static_cast<std::size_t>(m)) return 0.0;
    std::vector<double> fees = pool.pending_fees;
    auto nth = fees.begin() + (m - 1);
    std::nth_element(fees.begin(), nth, fees.end(), std::greater<>());
    return *nth;
}

SortedFees::SortedFees(std::span<const double> fees) : fees_(fees.begin(), fees.end()) {
    std::sort(fees_.begin(), fees_.end());
}

std::int64_t SortedFees::count_above(double b) const {
    return fees_.end() - std::upper_bound(fees_.begin(), fees_.end(), b);
}

std::int64_t SortedFees::count_at_or_above(double b) const {
    return fees_.end() - std::lower_bound(fees_.begin(), fees_.end(), b);
}

}  // namespace feetiming
