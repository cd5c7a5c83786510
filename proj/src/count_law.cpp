#include "feetiming/count_law.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "feetiming/errors.hpp"

namespace feetiming {

CountLaw::CountLaw(std::int64_t offset, std::vector<double> pmf) : offset_(offset), pmf_(std::move(pmf)) {
    // trim numerically empty edges, then renormalize
    std::size_t lo = 0;
    std::size_t hi = pmf_.size();
    while (hi > lo + 1 && pmf_[hi - 1] == 0.0) --hi;
    while (lo + 1 < hi && pmf_[lo] == 0.0) ++lo;
    if (lo > 0 || hi < pmf_.size()) {
        pmf_ = std::vector<double>(pmf_.begin() + static_cast<std::ptrdiff_t>(lo),
                                   pmf_.begin() + static_cast<std::ptrdiff_t>(hi));
        offset_ += static_cast<std::int64_t>(lo);
    }
    const double total = std::accumulate(pmf_.begin(), pmf_.end(), 0.0);
    if (!(total > 0.0)) throw NumericalError("count law has no mass");
    for (double& p : pmf_) p /= total;
}

CountLaw CountLaw::point(std::int64_t n) {
    if (n < 0) throw DomainError("count must be nonnegative");
    return CountLaw(n, {1.0});
}

CountLaw CountLaw::poisson(double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) throw DomainError("Poisson mean must be finite and nonnegative");
    if (mean == 0.0) return point(0);

    const auto mode = static_cast<std::int64_t>(std::floor(mean));
    const double log_mode = static_cast<double>(mode) * std::log(mean) - mean -
                            std::lgamma(static_cast<double>(mode) + 1.0);
    const double half_tol = 0.5 * kTailTolerance;

    // below the mode terms shrink by n/mean, above it by mean/(n+1); the
    // geometric bound on the remainder decides where to stop
    std::vector<double> lower;
    double p = std::exp(log_mode);
    for (std::int64_t n = mode; n > 0;) {
        const double ratio = static_cast<double>(n) / mean;
        const double next = p * ratio;
        --n;
        lower.push_back(next);
        p = next;
        if (ratio < 1.0 && p * ratio / (1.0 - ratio) < half_tol) break;
    }
    std::vector<double> upper{std::exp(log_mode)};
    p = upper.front();
    for (std::int64_t n = mode;; ++n) {
        const double ratio = mean / static_cast<double>(n + 1);
        p *= ratio;
        upper.push_back(p);
        if (ratio < 1.0 && p * ratio / (1.0 - ratio) < half_tol) break;
    }
    std::vector<double> pmf(lower.rbegin(), lower.rend());
    pmf.insert(pmf.end(), upper.begin(), upper.end());
    return CountLaw(mode - static_cast<std::int64_t>(lower.size()), std::move(pmf));
}

CountLaw CountLaw::geometric(double q) {
    if (!(q >= 0.0 && q < 1.0)) throw DomainError("geometric ratio must lie in [0, 1)");
    if (q == 0.0) return point(0);
    std::vector<double> pmf;
    double tail = 1.0;  // P(N >= n)
    while (tail >= kTailTolerance) {
        pmf.push_back(tail * (1.0 - q));
        tail *= q;
    }
    return CountLaw(0, std::move(pmf));
}

CountLaw CountLaw::binomial(std::int64_t n, double p) {
    if (n < 0) throw DomainError("binomial size must be nonnegative");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binomial probability must lie in [0, 1]");
    if (p == 0.0 || n == 0) return point(0);
    if (p == 1.0) return point(n);
    const double nn = static_cast<double>(n);
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
    for (std::int64_t j = 0; j <= n; ++j) {
        const double jj = static_cast<double>(j);
        pmf[static_cast<std::size_t>(j)] = std::exp(std::lgamma(nn + 1.0) - std::lgamma(jj + 1.0) -
                                                    std::lgamma(nn - jj + 1.0) + jj * lp + (nn - jj) * lq);
    }
    return CountLaw(0, std::move(pmf));
}

CountLaw CountLaw::from_survival(std::span<const double> survival) {
    std::vector<double> pmf;
    pmf.reserve(survival.size() + 1);
    double prev = 1.0;
    for (double s : survival) {
        pmf.push_back(std::max(prev - s, 0.0));
        prev = s;
    }
    pmf.push_back(prev);
    return CountLaw(0, std::move(pmf));
}

CountLaw CountLaw::convolve(const CountLaw& other) const {
    std::vector<double> out(pmf_.size() + other.pmf_.size() - 1, 0.0);
    for (std::size_t i = 0; i < pmf_.size(); ++i) {
        const double a = pmf_[i];
        if (a == 0.0) continue;
        for (std::size_t j = 0; j < other.pmf_.size(); ++j) out[i + j] += a * other.pmf_[j];
    }
    return CountLaw(offset_ + other.offset_, std::move(out));
}

CountLaw CountLaw::shifted(std::int64_t by) const {
    if (offset_ + by < 0) throw DomainError("shift would produce negative counts");
    CountLaw out = *this;
    out.offset_ += by;
    return out;
}

double CountLaw::probability(std::int64_t n) const {
    if (n < offset_ || n > max_count()) return 0.0;
    return pmf_[static_cast<std::size_t>(n - offset_)];
}

double CountLaw::mean() const {
    double s = 0.0;
    for (std::size_t i = 0; i < pmf_.size(); ++i) {
        s += pmf_[i] * static_cast<double>(offset_ + static_cast<std::int64_t>(i));
    }
    return s;
}

// ---------------------------------------------------------------------------

namespace {

void check_elapsed(const BlockIntervalModel& interval, double elapsed) {
    if (!(elapsed >= 0.0)) throw DomainError("elapsed time must be nonnegative");
    if (interval.is_fixed() && elapsed >= interval.duration()) {
        throw InvalidStateError("fixed-interval block already due at this elapsed time");
    }
}

}  // namespace

CountLaw past_arrivals(const ArrivalProcess& arrivals, double elapsed) {
    if (!(elapsed >= 0.0)) throw DomainError("elapsed time must be nonnegative");
    if (arrivals.is_linear()) return CountLaw::point(linear_arrival_count(arrivals.rate(), elapsed));
    return CountLaw::poisson(arrivals.rate() * elapsed);
}

CountLaw future_arrivals(const BlockIntervalModel& interval, const ArrivalProcess& arrivals,
                         double elapsed) {
    check_elapsed(interval, elapsed);
    const double beta = arrivals.rate();
    if (beta == 0.0) return CountLaw::point(0);

    if (interval.is_fixed()) {
        const double horizon = interval.duration();
        if (arrivals.is_linear()) {
            return CountLaw::point(linear_arrival_count(beta, horizon) - linear_arrival_count(beta, elapsed));
        }
        return CountLaw::poisson(beta * (horizon - elapsed));
    }

    if (!arrivals.is_linear()) {
        // Poisson arrivals over an exponential residual: geometric count
        return CountLaw::geometric(beta / (interval.rate() + beta));
    }

    // j-th future arrival lands at (n0 + j) / beta and counts iff the block
    // has not come yet: P(N >= j) = 1 - G((n0 + j) / beta | elapsed)
    const std::int64_t n0 = linear_arrival_count(beta, elapsed);
    std::vector<double> survival;
    for (std::int64_t j = 1;; ++j) {
        const double at = std::max(static_cast<double>(n0 + j) / beta, elapsed);
        const double s = 1.0 - residual_interval_cdf(interval, elapsed, at);
        survival.push_back(s);
        if (s < kTailTolerance) break;
    }
    return CountLaw::from_survival(survival);
}

CountLaw round_arrivals(const BlockIntervalModel& interval, const ArrivalProcess& arrivals,
                        double elapsed) {
    check_elapsed(interval, elapsed);
    if (interval.is_fixed() && !arrivals.is_linear()) {
        return CountLaw::poisson(arrivals.rate() * interval.duration());
    }
    const CountLaw future = future_arrivals(interval, arrivals, elapsed);
    const CountLaw past = past_arrivals(arrivals, elapsed);
    if (past.min_count() == past.max_count()) return future.shifted(past.min_count());
    return past.convolve(future);
}

CountLaw window_arrivals(const ArrivalProcess& arrivals, double from, double to) {
    if (!(from >= 0.0 && to >= from)) throw DomainError("invalid arrival window");
    if (arrivals.is_linear()) {
        return CountLaw::point(linear_arrival_count(arrivals.rate(), to) -
                               linear_arrival_count(arrivals.rate(), from));
    }
    return CountLaw::poisson(arrivals.rate() * (to - from));
}

// ---------------------------------------------------------------------------

double competition_success(const CountLaw& law, double beat, std::int64_t slots) {
    if (slots <= 0) return 0.0;
    const std::int64_t k = slots - 1;
    const auto pmf = law.pmf();
    const std::int64_t lo = law.min_count();
    const std::int64_t hi = law.max_count();

    double certain = 0.0;  // mass with n <= k always succeeds
    for (std::int64_t n = lo; n <= std::min(hi, k); ++n) certain += pmf[static_cast<std::size_t>(n - lo)];
    if (hi <= k || beat <= 0.0) return beat <= 0.0 ? 1.0 : certain;
    if (beat >= 1.0) return certain;

    // B_n = P(Bin(n, beat) <= k) for n > k via
    //   B_{n+1} = B_n - beat * f_n,  f_n = C(n, k) beat^k (1 - beat)^(n - k)
    const double log_beat = std::log(beat);
    const double log_keep = std::log1p(-beat);
    double log_f = static_cast<double>(k) * log_beat;
    double cdf = 1.0;
    double acc = certain;
    for (std::int64_t n = k; n < hi; ++n) {
        cdf -= beat * std::exp(log_f);
        const double nn = static_cast<double>(n + 1);
        log_f += std::log(nn / (nn - static_cast<double>(k))) + log_keep;
        const std::int64_t next = n + 1;
        if (cdf <= 0.0) break;
        if (next >= lo) acc += pmf[static_cast<std::size_t>(next - lo)] * cdf;
        if (cdf < 1e-16) break;  // remaining terms are bounded by cdf
    }
    return std::clamp(acc, 0.0, 1.0);
}

double competition_failure(const CountLaw& law, double beat, std::int64_t slots) {
    if (slots <= 0) return 1.0;
    if (beat <= 0.0) return 0.0;
    const auto pmf = law.pmf();
    const std::int64_t lo = law.min_count();
    const std::int64_t hi = law.max_count();
    if (hi < slots) return 0.0;
    if (beat >= 1.0) {
        double s = 0.0;
        for (std::int64_t n = std::max(lo, slots); n <= hi; ++n) s += pmf[static_cast<std::size_t>(n - lo)];
        return s;
    }

    // U_n = P(Bin(n, beat) >= slots), U_{n+1} = U_n + beat * P(Bin(n, beat) = slots - 1)
    const std::int64_t k = slots - 1;
    const double log_beat = std::log(beat);
    const double log_keep = std::log1p(-beat);
    double log_f = static_cast<double>(k) * log_beat;  // n = k
    double tail = 0.0;
    double acc = 0.0;
    for (std::int64_t n = k; n < hi; ++n) {
        tail += beat * std::exp(log_f);
        const double nn = static_cast<double>(n + 1);
        log_f += std::log(nn / (nn - static_cast<double>(k))) + log_keep;
        const std::int64_t next = n + 1;
        if (next >= lo) acc += pmf[static_cast<std::size_t>(next - lo)] * std::min(tail, 1.0);
    }
    return std::clamp(acc, 0.0, 1.0);
}

double binomial_cdf(std::int64_t n, double p, std::int64_t k) {
    if (k < 0) return 0.0;
    if (k >= n) return 1.0;
    if (p <= 0.0) return 1.0;
    if (p >= 1.0) return 0.0;
    const double nn = static_cast<double>(n);
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    double s = 0.0;
    for (std::int64_t j = 0; j <= k; ++j) {
        const double jj = static_cast<double>(j);
        s += std::exp(std::lgamma(nn + 1.0) - std::lgamma(jj + 1.0) - std::lgamma(nn - jj + 1.0) +
                      jj * lp + (nn - jj) * lq);
    }
    return std::min(s, 1.0);
}

}  // namespace feetiming
