#include "feetiming/oblivious.hpp"

#include <algorithm>
#include <cmath>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "feetiming/closed_form.hpp"
#include "feetiming/errors.hpp"
#include "feetiming/parallel.hpp"

namespace feetiming {

namespace {

void check_fee(const Scenario& scenario, double b) {
    if (!(b >= 0.0 && b <= scenario.valuation)) throw DomainError("fee must lie in [0, V]");
}

std::vector<double> jump_points(const Scenario& scenario, std::span<const double> pending, double hi) {
    std::vector<double> out(pending.begin(), pending.end());
    const auto extra = scenario.fees.breakpoints(0.0, hi);
    out.insert(out.end(), extra.begin(), extra.end());
    std::erase_if(out, [hi](double x) { return !(x > 0.0 && x < hi); });
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// composite 20-point Gauss-Legendre over [lo, hi] split at `cuts`, ~`nodes` in total
template <class F>
double integrate_pieces(F&& f, double lo, double hi, const std::vector<double>& cuts, int nodes = 2048) {
    if (!(hi > lo)) return 0.0;
    std::vector<double> edges{lo};
    for (double c : cuts) {
        if (c > lo && c < hi) edges.push_back(c);
    }
    edges.push_back(hi);
    const int panels = std::max(1, nodes / 20);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const double a = edges[i];
        const double b = edges[i + 1];
        const int k = std::max(1, static_cast<int>(std::ceil(panels * (b - a) / (hi - lo))));
        const double w = (b - a) / k;
        for (int j = 0; j < k; ++j) {
            const double x0 = a + w * j;
            const double x1 = j == k - 1 ? b : x0 + w;
            total += boost::math::quadrature::gauss<double, 20>::integrate(f, x0, x1);
        }
    }
    return total;
}

// the wait policy matches the threshold when ties go to the strategic user
double wait_premium(const Scenario& scenario) {
    return scenario.tie_rule == TieRule::StrategicWins ? 0.0 : scenario.tick;
}

void check_fixed_open(const Scenario& scenario, double elapsed) {
    if (!scenario.interval.is_fixed()) throw ConfigError("operation needs a fixed block interval");
    if (!(elapsed >= 0.0)) throw DomainError("elapsed time must be nonnegative");
    if (elapsed >= scenario.interval.duration()) {
        throw InvalidStateError("fixed-interval block already due at this elapsed time");
    }
}

// Future competition seen from `elapsed`. Poisson arrivals over an exponential
// residual give a geometric count, which has a closed form.
class FutureCompetition {
public:
    FutureCompetition(const Scenario& scenario, double elapsed) {
        if (!scenario.interval.is_exponential()) {
            law_ = future_arrivals(scenario.interval, scenario.arrivals, elapsed);
            return;
        }
        if (!(elapsed >= 0.0)) throw DomainError("elapsed time must be nonnegative");
        const double lambda = scenario.interval.rate();
        const double beta = scenario.arrivals.rate();
        if (beta == 0.0) {
            first_ = 0.0;
        } else if (scenario.arrivals.is_linear()) {
            // arrival j lands at (n0 + j) / beta and survives the block with
            // probability first * ratio^(j - 1)
            const auto n0 = linear_arrival_count(beta, elapsed);
            const double at = std::max(static_cast<double>(n0 + 1) / beta, elapsed);
            first_ = std::exp(-lambda * (at - elapsed));
            ratio_ = std::exp(-lambda / beta);
        } else {
            first_ = ratio_ = beta / (lambda + beta);
        }
        geometric_ = true;
    }

    double success(double beat, std::int64_t slots) const {
        if (!geometric_) return competition_success(law_, beat, slots);
        if (slots <= 0) return 0.0;
        if (beat <= 0.0 || first_ == 0.0) return 1.0;
        if (first_ == ratio_) return closed_form::pow_ibr(ratio_, 1.0 - beat, slots);
        // P(at least k beating arrivals) = first * h * (ratio * h)^(k - 1)
        const double h = beat / (1.0 - (1.0 - beat) * ratio_);
        return 1.0 - first_ * h * std::pow(ratio_ * h, static_cast<double>(slots - 1));
    }

private:
    CountLaw law_;
    bool geometric_ = false;
    double first_ = 0.0;
    double ratio_ = 0.0;
};

}  // namespace

// ---------------------------------------------------------------------------

Strategy Strategy::parse(const std::string& text, double valuation) {
    if (text == "nbr") return {StrategyKind::NBR};
    if (text == "ibr") return {StrategyKind::IBR};
    if (text == "fbr") return {StrategyKind::FBR};
    if (text == "baseline" || text == "average") return {StrategyKind::AverageBaseline};
    if (text.rfind("fixed:", 0) == 0) {
        const std::string arg = text.substr(6);
        if (arg == "V" || arg == "v") return {StrategyKind::FixedFee, valuation};
        std::size_t used = 0;
        double fee = 0.0;
        try {
            fee = std::stod(arg, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != arg.size()) throw ConfigError("bad fixed fee '" + arg + "'");
        return {StrategyKind::FixedFee, fee};
    }
    throw ConfigError("unknown strategy '" + text + "' (nbr, ibr, fbr, baseline, fixed:<fee|V>)");
}

std::string Strategy::name() const {
    switch (kind) {
        case StrategyKind::NBR: return "nbr";
        case StrategyKind::IBR: return "ibr";
        case StrategyKind::FBR: return "fbr";
        case StrategyKind::AverageBaseline: return "baseline";
        case StrategyKind::FixedFee: {
            char buf[64];
            std::snprintf(buf, sizeof buf, "fixed:%.17g", fixed_fee);
            return buf;
        }
    }
    return "?";
}

// ---------------------------------------------------------------------------

double nbr_success_prob(const Scenario& scenario, double elapsed, double b) {
    check_fee(scenario, b);
    const CountLaw law = round_arrivals(scenario.interval, scenario.arrivals, elapsed);
    return competition_success(law, scenario.beat_probability(b), scenario.capacity);
}

StrategyDecision nbr_optimize(const Scenario& scenario, double elapsed) {
    scenario.validate();
    const CountLaw law = round_arrivals(scenario.interval, scenario.arrivals, elapsed);
    auto win = [&](double b) {
        return competition_success(law, scenario.beat_probability(b), scenario.capacity);
    };
    StrategyDecision d = maximize_fee(scenario, win, jump_points(scenario, {}, scenario.valuation));
    d.broadcast_time = elapsed;
    return d;
}

double ibr_success_prob(const Scenario& scenario, const MempoolSnapshot& pool, double b) {
    check_fee(scenario, b);
    pool.validate();
    const FutureCompetition future(scenario, pool.elapsed);
    const auto slots = scenario.capacity - count_competing(pool, b, scenario.tie_rule);
    return future.success(scenario.beat_probability(b), slots);
}

StrategyDecision ibr_optimize(const Scenario& scenario, const MempoolSnapshot& pool) {
    scenario.validate();
    pool.validate();
    const FutureCompetition future(scenario, pool.elapsed);
    const SortedFees sorted(pool.pending_fees);
    auto win = [&](double b) {
        const auto slots = scenario.capacity - sorted.count_competing(b, scenario.tie_rule);
        return future.success(scenario.beat_probability(b), slots);
    };
    StrategyDecision d =
        maximize_fee(scenario, win, jump_points(scenario, pool.pending_fees, scenario.valuation));
    d.broadcast_time = pool.elapsed;
    return d;
}

// ---------------------------------------------------------------------------

double pos_threshold_cdf(const Scenario& scenario, const MempoolSnapshot& pool, double x) {
    check_fixed_open(scenario, pool.elapsed);
    if (x < 0.0) return 0.0;
    const CountLaw law = future_arrivals(scenario.interval, scenario.arrivals, pool.elapsed);
    const auto slots = scenario.capacity - count_above(pool, x);
    return competition_success(law, 1.0 - scenario.fees.cdf(x), slots);
}

double pos_wait_expected_utility(const Scenario& scenario, const MempoolSnapshot& pool) {
    scenario.validate();
    pool.validate();
    check_fixed_open(scenario, pool.elapsed);
    const double cap = scenario.valuation - wait_premium(scenario);
    if (cap <= 0.0) return 0.0;

    const CountLaw law = future_arrivals(scenario.interval, scenario.arrivals, pool.elapsed);
    const SortedFees sorted(pool.pending_fees);
    auto cdf = [&](double x) {
        const auto slots = scenario.capacity - sorted.count_above(x);
        return competition_success(law, 1.0 - scenario.fees.cdf(x), slots);
    };
    // E[(cap - b^m)^+] = integral of P(b^m <= x) over [0, cap]
    return integrate_pieces(cdf, 0.0, cap, jump_points(scenario, pool.pending_fees, cap));
}

std::optional<double> pos_wait_fee(const Scenario& scenario, const MempoolSnapshot& final_pool) {
    const double fee = threshold_fee(final_pool, scenario.capacity) + wait_premium(scenario);
    if (fee > scenario.valuation) return std::nullopt;
    return fee;
}

StrategyDecision fbr_decide(const Scenario& scenario, const MempoolSnapshot& pool) {
    if (scenario.interval.is_exponential()) {
        StrategyDecision d = ibr_optimize(scenario, pool);
        d.broadcast_time = pool.elapsed;
        return d;
    }
    check_fixed_open(scenario, pool.elapsed);
    StrategyDecision d;
    d.broadcast_time = scenario.interval.duration();
    d.expected_utility = pos_wait_expected_utility(scenario, pool);
    const double cap = scenario.valuation - wait_premium(scenario);
    d.inclusion_probability = cap < 0.0 ? 0.0 : pos_threshold_cdf(scenario, pool, cap);
    d.fee = d.inclusion_probability > 0.0
                ? scenario.valuation - d.expected_utility / d.inclusion_probability
                : scenario.valuation;
    return d;
}

double delayed_success_prob(const Scenario& scenario, const MempoolSnapshot& pool, double b, double delay) {
    check_fee(scenario, b);
    pool.validate();
    if (!(delay >= 0.0)) throw DomainError("delay must be nonnegative");
    const double start = pool.elapsed;
    const double later = start + delay;
    if (delay == 0.0) return ibr_success_prob(scenario, pool, b);

    double survive = 1.0;
    CountLaw future;
    if (scenario.interval.is_exponential()) {
        survive = std::exp(-scenario.interval.rate() * delay);
        future = future_arrivals(scenario.interval, scenario.arrivals, later);
    } else {
        check_fixed_open(scenario, start);
        const double horizon = scenario.interval.duration();
        if (later > horizon) return 0.0;
        future = later < horizon ? future_arrivals(scenario.interval, scenario.arrivals, later)
                                 : CountLaw::point(0);
    }

    const double beat = scenario.beat_probability(b);
    CountLaw interim_beating;
    if (scenario.arrivals.is_linear()) {
        const auto d = linear_arrival_count(scenario.arrivals.rate(), later) -
                       linear_arrival_count(scenario.arrivals.rate(), start);
        interim_beating = CountLaw::binomial(d, beat);
    } else {
        interim_beating = CountLaw::poisson(scenario.arrivals.rate() * delay * beat);
    }

    const auto slots = scenario.capacity - count_competing(pool, b, scenario.tie_rule);
    double total = 0.0;
    const auto pmf = interim_beating.pmf();
    for (std::int64_t j = interim_beating.min_count(); j <= interim_beating.max_count(); ++j) {
        if (slots - j <= 0) break;
        total += pmf[static_cast<std::size_t>(j - interim_beating.min_count())] *
                 competition_success(future, beat, slots - j);
    }
    return survive * total;
}

// ---------------------------------------------------------------------------

double expected_round_threshold(const Scenario& scenario) {
    scenario.validate();
    const CountLaw law = round_arrivals(scenario.interval, scenario.arrivals, 0.0);
    const int m = scenario.capacity;
    const FeeDistribution& fees = scenario.fees;
    // P(b^m > x) = P(more than m - 1 fees above x)
    auto tail = [&](double x) { return competition_failure(law, 1.0 - fees.cdf(x), m); };
    const double reach = competition_failure(law, 1.0, m);  // P(N >= m)

    switch (fees.kind()) {
        case FeeDistribution::Kind::Pareto: {
            const double lo = fees.pareto_min();
            const double shape = fees.pareto_shape();
            // x = Q(u): dx = lo / shape * (1 - u)^(-1 - 1/shape) du
            auto g = [&](double u) {
                if (u >= 1.0) return 0.0;
                const double keep = 1.0 - u;
                const double t = competition_failure(law, keep, m);
                if (t == 0.0) return 0.0;
                return t * lo / shape * std::pow(keep, -1.0 - 1.0 / shape);
            };
            boost::math::quadrature::tanh_sinh<double> integrator;
            return lo * reach + integrator.integrate(g, 0.0, 1.0);
        }
        case FeeDistribution::Kind::Uniform: {
            const double lo = fees.uniform_lo();
            return lo * reach + integrate_pieces(tail, lo, fees.uniform_hi(), {});
        }
        case FeeDistribution::Kind::Empirical: {
            std::vector<double> atoms(fees.samples().begin(), fees.samples().end());
            atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
            double e = atoms.front() * reach;
            for (std::size_t i = 0; i + 1 < atoms.size(); ++i) e += (atoms[i + 1] - atoms[i]) * tail(atoms[i]);
            return e;
        }
    }
    return 0.0;
}

StrategyDecision baseline_decide(const Scenario& scenario, double elapsed) {
    StrategyDecision d;
    d.fee = expected_round_threshold(scenario);
    d.broadcast_time = elapsed;
    if (d.fee > scenario.valuation) return d;
    d.inclusion_probability = nbr_success_prob(scenario, elapsed, d.fee);
    d.expected_utility = (scenario.valuation - d.fee) * d.inclusion_probability;
    return d;
}

StrategyDecision fixed_fee_decide(const Scenario& scenario, double elapsed, double fee) {
    StrategyDecision d;
    d.fee = fee;
    d.broadcast_time = elapsed;
    d.inclusion_probability = nbr_success_prob(scenario, elapsed, fee);
    d.expected_utility = (scenario.valuation - fee) * d.inclusion_probability;
    return d;
}

// ---------------------------------------------------------------------------

MempoolSnapshot ArrivalStream::pool_at(double t) const {
    MempoolSnapshot pool;
    pool.elapsed = t;
    std::size_t count = 0;
    if (linear_rate > 0.0) {
        count = static_cast<std::size_t>(std::min<std::int64_t>(
            linear_arrival_count(linear_rate, t), static_cast<std::int64_t>(fees.size())));
    } else {
        count = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
    }
    pool.pending_fees.assign(fees.begin(), fees.begin() + static_cast<std::ptrdiff_t>(count));
    return pool;
}

ArrivalStream draw_arrivals(const Scenario& scenario, double horizon, Rng& rng) {
    ArrivalStream s;
    const double beta = scenario.arrivals.rate();
    if (beta == 0.0) return s;
    if (scenario.arrivals.is_linear()) {
        s.linear_rate = beta;
        const auto n = linear_arrival_count(beta, horizon);
        for (std::int64_t j = 1; j <= n; ++j) {
            s.times.push_back(static_cast<double>(j) / beta);
            s.fees.push_back(scenario.fees.sample(rng));
        }
        return s;
    }
    double t = exponential_draw(rng, beta);
    while (t <= horizon) {
        s.times.push_back(t);
        s.fees.push_back(scenario.fees.sample(rng));
        t += exponential_draw(rng, beta);
    }
    return s;
}

std::vector<CurvePoint> utility_vs_elapsed_curve(const Scenario& scenario, const Strategy& strategy,
                                                 const std::vector<double>& grid,
                                                 const CurveOptions& options) {
    scenario.validate();
    if (grid.empty()) throw ConfigError("elapsed grid is empty");
    for (double t : grid) {
        if (!(t >= 0.0)) throw DomainError("elapsed grid values must be nonnegative");
        if (scenario.interval.is_fixed() && t >= scenario.interval.duration()) {
            throw InvalidStateError("elapsed grid reaches the fixed block deadline");
        }
    }

    std::vector<CurvePoint> out(grid.size());
    const bool pooled = strategy.kind == StrategyKind::IBR || strategy.kind == StrategyKind::FBR;

    if (!pooled) {
        double baseline_fee = 0.0;
        if (strategy.kind == StrategyKind::AverageBaseline) baseline_fee = expected_round_threshold(scenario);
        parallel_for(grid.size(), [&](std::size_t i) {
            StrategyDecision d;
            switch (strategy.kind) {
                case StrategyKind::NBR: d = nbr_optimize(scenario, grid[i]); break;
                case StrategyKind::FixedFee: d = fixed_fee_decide(scenario, grid[i], strategy.fixed_fee); break;
                default:
                    d.fee = baseline_fee;
                    if (baseline_fee <= scenario.valuation) {
                        d.inclusion_probability = nbr_success_prob(scenario, grid[i], baseline_fee);
                        d.expected_utility = (scenario.valuation - baseline_fee) * d.inclusion_probability;
                    }
                    break;
            }
            out[i] = {grid[i], d.expected_utility, 0.0, d.fee, d.inclusion_probability};
        });
        return out;
    }

    if (options.draws < 1) throw ConfigError("curve needs at least one pool draw");
    const auto draws = static_cast<std::size_t>(options.draws);
    const double horizon = *std::max_element(grid.begin(), grid.end());
    // [draw][grid] results
    std::vector<StrategyDecision> results(draws * grid.size());
    parallel_for(draws, [&](std::size_t d) {
        Rng rng = make_stream(options.seed, d);
        const ArrivalStream stream = draw_arrivals(scenario, horizon, rng);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const MempoolSnapshot pool = stream.pool_at(grid[i]);
            results[d * grid.size() + i] =
                strategy.kind == StrategyKind::IBR ? ibr_optimize(scenario, pool) : fbr_decide(scenario, pool);
        }
    });

    std::vector<double> u(draws), f(draws), w(draws);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t d = 0; d < draws; ++d) {
            const auto& r = results[d * grid.size() + i];
            u[d] = r.expected_utility;
            f[d] = r.fee;
            w[d] = r.inclusion_probability;
        }
        const double n = static_cast<double>(draws);
        const double mean = pairwise_sum(u) / n;
        double var = 0.0;
        for (double x : u) var += (x - mean) * (x - mean);
        const double se = draws > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
        out[i] = {grid[i], mean, se, pairwise_sum(f) / n, pairwise_sum(w) / n};
    }
    return out;
}

}  // namespace feetiming
