#include "feetiming/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "feetiming/errors.hpp"
#include "feetiming/parallel.hpp"

namespace feetiming {

namespace {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    if (xs.empty()) return {};
    const double mean = pairwise_sum(xs) / n;
    std::vector<double> sq(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - mean) * (xs[i] - mean);
    const double se = xs.size() > 1 ? std::sqrt(pairwise_sum(sq) / (n - 1.0) / n) : 0.0;
    return {mean, se};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Fees arriving in (from, to], appended to `out`; linear arrivals sit at j / beta.
void append_arrivals(const Scenario& s, double from, double to, Rng& rng, std::vector<double>& out,
                     std::vector<double>* times = nullptr) {
    const double beta = s.arrivals.rate();
    if (beta == 0.0 || !(to > from)) return;
    if (s.arrivals.is_linear()) {
        const auto first = linear_arrival_count(beta, from) + 1;
        const auto last = linear_arrival_count(beta, to);
        for (auto j = first; j <= last; ++j) {
            out.push_back(s.fees.sample(rng));
            if (times) times->push_back(static_cast<double>(j) / beta);
        }
        return;
    }
    for (double t = from + exponential_draw(rng, beta); t <= to; t += exponential_draw(rng, beta)) {
        out.push_back(s.fees.sample(rng));
        if (times) times->push_back(t);
    }
}

double draw_block_time(const Scenario& s, double elapsed, Rng& rng) {
    if (s.interval.is_exponential()) return elapsed + exponential_draw(rng, s.interval.rate());
    return s.interval.duration();
}

std::int64_t competitors_above(const std::vector<double>& fees, double b, TieRule rule) {
    if (rule == TieRule::StrategicWins) {
        return std::count_if(fees.begin(), fees.end(), [b](double x) { return x > b; });
    }
    return std::count_if(fees.begin(), fees.end(), [b](double x) { return x >= b; });
}

// re-derive inclusion by sorting everyone by (fee, priority)
bool audit_inclusion(const std::vector<double>& fees, double b, int m, TieRule rule) {
    struct Entry {
        double fee;
        double priority;
    };
    std::vector<Entry> all;
    all.reserve(fees.size() + 1);
    for (std::size_t i = 0; i < fees.size(); ++i) all.push_back({fees[i], static_cast<double>(i)});
    const double sp_priority = rule == TieRule::StrategicWins ? std::numeric_limits<double>::infinity()
                                                              : -std::numeric_limits<double>::infinity();
    all.push_back({b, sp_priority});
    std::sort(all.begin(), all.end(), [](const Entry& x, const Entry& y) {
        return x.fee > y.fee || (x.fee == y.fee && x.priority > y.priority);
    });
    const auto top = std::min<std::size_t>(static_cast<std::size_t>(m), all.size());
    for (std::size_t i = 0; i < top; ++i) {
        if (all[i].priority == sp_priority) return true;
    }
    return false;
}

void check_trials(std::int64_t trials) {
    if (trials < 1) throw ConfigError("trials must be at least 1");
}

}  // namespace

SimulationReport summarize(const std::vector<double>& utility, const std::vector<double>& included,
                           const std::vector<double>& fee, std::uint64_t seed) {
    SimulationReport r;
    r.trials = static_cast<std::int64_t>(utility.size());
    r.seed = seed;
    const auto u = mean_se(utility);
    r.mean_utility = u.mean;
    r.utility_stderr = u.se;
    r.inclusion_rate = mean_se(included).mean;
    std::vector<double> paid;
    for (std::size_t i = 0; i < fee.size(); ++i) {
        if (included[i] > 0.0) paid.push_back(fee[i]);
    }
    r.mean_fee = mean_se(paid).mean;
    return r;
}

// ---------------------------------------------------------------------------

SimulationReport simulate_oblivious(const Scenario& scenario, const ObliviousPolicy& policy, double elapsed,
                                    std::int64_t trials, std::uint64_t seed,
                                    const std::optional<MempoolSnapshot>& pool) {
    const auto t0 = std::chrono::steady_clock::now();
    scenario.validate();
    check_trials(trials);
    if (!(elapsed >= 0.0)) throw DomainError("elapsed time must be nonnegative");
    if (scenario.interval.is_fixed() && elapsed >= scenario.interval.duration()) {
        throw InvalidStateError("fixed-interval block already due at this elapsed time");
    }
    std::optional<MempoolSnapshot> given = pool;
    if (given) {
        given->validate();
        given->elapsed = elapsed;
    }

    const bool waits = policy.kind == StrategyKind::FBR && scenario.interval.is_fixed();
    const bool per_pool = (policy.kind == StrategyKind::IBR || policy.kind == StrategyKind::FBR) && !waits;
    double preset = 0.0;
    bool abstain = false;
    switch (policy.kind) {
        case StrategyKind::NBR: preset = nbr_optimize(scenario, elapsed).fee; break;
        case StrategyKind::FixedFee:
            if (!(policy.fixed_fee >= 0.0)) throw DomainError("fixed fee must be nonnegative");
            preset = policy.fixed_fee;
            break;
        case StrategyKind::AverageBaseline:
            preset = expected_round_threshold(scenario);
            abstain = preset > scenario.valuation;
            break;
        default:
            if (per_pool && given) preset = ibr_optimize(scenario, *given).fee;
            break;
    }

    const auto n = static_cast<std::size_t>(trials);
    std::vector<double> utility(n), included(n), fee(n);
    parallel_for(n, [&](std::size_t i) {
        Rng rng = make_stream(seed, i);
        std::vector<double> fees;
        if (given) {
            fees = given->pending_fees;
        } else {
            append_arrivals(scenario, 0.0, elapsed, rng, fees);
            // an arrival exactly at time 0 would be missed by (0, elapsed]
        }
        const std::size_t past = fees.size();
        const double block = draw_block_time(scenario, elapsed, rng);
        append_arrivals(scenario, elapsed, block, rng, fees);

        double b = preset;
        bool skip = abstain;
        if (per_pool && !given) {
            MempoolSnapshot seen;
            seen.elapsed = elapsed;
            seen.pending_fees.assign(fees.begin(), fees.begin() + static_cast<std::ptrdiff_t>(past));
            b = ibr_optimize(scenario, seen).fee;
        } else if (waits) {
            const auto wait_fee = pos_wait_fee(scenario, {fees, block});
            skip = !wait_fee.has_value();
            b = wait_fee.value_or(0.0);
        }

        bool in = false;
        if (!skip) {
            in = competitors_above(fees, b, scenario.tie_rule) <= scenario.capacity - 1;
            if (i % 100 == 0 && in != audit_inclusion(fees, b, scenario.capacity, scenario.tie_rule)) {
                throw NumericalError("inclusion audit mismatch in trial " + std::to_string(i));
            }
        }
        utility[i] = in ? scenario.valuation - b : 0.0;
        included[i] = in ? 1.0 : 0.0;
        fee[i] = b;
    });

    SimulationReport r = summarize(utility, included, fee, seed);
    r.wall_time = seconds_since(t0);
    return r;
}

// ---------------------------------------------------------------------------

namespace {

// One round of the bumping game. Fees are in increments; user n-1 is strategic.
class BumpRound {
public:
    explicit BumpRound(const CtmcParams& p) : p_(p), fee_(static_cast<std::size_t>(p.n), 0), seq_(static_cast<std::size_t>(p.n), 0) {
        order_.reserve(static_cast<std::size_t>(p.n));
    }

    struct Outcome {
        double utility = 0.0;
        bool included = false;
        int fee = 0;
        std::int64_t events = 0;
        bool empty = true;
        CtmcState end;  // Q-state at the block
    };

    // `book(state_index, dt)` receives every sojourn; `opening` is the state
    // booked while the mempool is still empty.
    template <class Book>
    Outcome run(Rng& rng, std::size_t opening, Book&& book) {
        order_.clear();
        std::fill(fee_.begin(), fee_.end(), 0);
        std::fill(seq_.begin(), seq_.end(), 0);
        std::int64_t counter = 0;
        int since_sp = 0;
        bool sp_bid = false;
        const int sp = p_.n - 1;
        Outcome out;

        for (;;) {
            const auto size = static_cast<int>(order_.size());
            const int top = std::min(p_.m, size);
            const int threshold = size >= p_.m ? fee_[static_cast<std::size_t>(order_[static_cast<std::size_t>(p_.m - 1)])] : 0;
            const int next_fee = threshold + 1;
            const bool allowed = next_fee <= p_.v_hat;

            bool sp_in_top = false;
            int ordinary_in_top = 0;
            for (int r = 0; r < top; ++r) {
                if (order_[static_cast<std::size_t>(r)] == sp) {
                    sp_in_top = true;
                } else {
                    ++ordinary_in_top;
                }
            }
            const int behind = (p_.n - 1) - ordinary_in_top;
            const double rate_ord = allowed ? p_.gamma * behind : 0.0;
            const double rate_sp = allowed && !sp_in_top ? p_.gamma_s : 0.0;
            const double total = p_.lambda + rate_ord + rate_sp;

            const double dt = exponential_draw(rng, total);
            const CtmcState now = current(since_sp);
            book(order_.empty() ? opening : state_index(p_, now), dt);
            ++out.events;

            const double u = uniform01(rng) * total;
            if (u < p_.lambda) {
                out.empty = order_.empty();
                if (!out.empty) out.end = now;
                out.included = sp_bid && sp_in_top;
                out.fee = fee_[static_cast<std::size_t>(sp)];
                out.utility = out.included ? p_.eta * (p_.v_hat - out.fee) : 0.0;
                return out;
            }
            int who = sp;
            if (u < p_.lambda + rate_ord) {
                // uniform choice among ordinary users outside the top m
                int pick = static_cast<int>(uniform01(rng) * behind);
                pick = std::min(pick, behind - 1);
                for (int user = 0; user < sp; ++user) {
                    if (in_top(user, top)) continue;
                    if (pick-- == 0) {
                        who = user;
                        break;
                    }
                }
                ++since_sp;
            } else {
                since_sp = 0;
                sp_bid = true;
            }
            place(who, next_fee, ++counter);
        }
    }

private:
    bool in_top(int user, int top) const {
        for (int r = 0; r < top; ++r) {
            if (order_[static_cast<std::size_t>(r)] == user) return true;
        }
        return false;
    }

    void place(int user, int fee, std::int64_t seq) {
        order_.erase(std::remove(order_.begin(), order_.end(), user), order_.end());
        fee_[static_cast<std::size_t>(user)] = fee;
        seq_[static_cast<std::size_t>(user)] = seq;
        // ranked by fee, later bids first among equal fees
        auto pos = std::find_if(order_.begin(), order_.end(), [&](int other) {
            const auto o = static_cast<std::size_t>(other);
            return fee_[o] < fee || (fee_[o] == fee && seq_[o] < seq);
        });
        order_.insert(pos, user);
    }

    CtmcState current(int since_sp) const {
        if (order_.empty()) return {};
        const int b = fee_[static_cast<std::size_t>(order_.front())];
        int k = 0;
        for (int user : order_) k += fee_[static_cast<std::size_t>(user)] == b ? 1 : 0;
        return {CtmcState::Tag::Q, k, b, std::min(since_sp, p_.m)};
    }

    const CtmcParams& p_;
    std::vector<int> fee_;
    std::vector<std::int64_t> seq_;
    std::vector<int> order_;
};

}  // namespace

SimulationReport simulate_semi_strategic(const CtmcParams& params, std::int64_t trials, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    params.validate();
    check_trials(trials);
    const auto n = static_cast<std::size_t>(trials);
    std::vector<double> utility(n), included(n), fee(n);
    // rounds start from an empty mempool, so they are independent; chunks of
    // rounds share one substream
    constexpr std::size_t chunk = 256;
    const std::size_t chunks = (n + chunk - 1) / chunk;
    parallel_for(chunks, [&](std::size_t c) {
        Rng rng = make_stream(seed, c);
        BumpRound round(params);
        const std::size_t end = std::min(n, (c + 1) * chunk);
        for (std::size_t i = c * chunk; i < end; ++i) {
            const auto out = round.run(rng, 0, [](std::size_t, double) {});
            utility[i] = out.utility;
            included[i] = out.included ? 1.0 : 0.0;
            fee[i] = params.eta * out.fee;
        }
    });
    SimulationReport r = summarize(utility, included, fee, seed);
    r.wall_time = seconds_since(t0);
    return r;
}

OccupancyEstimate semi_strategic_occupancy(const CtmcParams& params, std::int64_t min_events, std::uint64_t seed,
                                           int batches) {
    params.validate();
    if (min_events < 1 || batches < 2) throw ConfigError("occupancy needs events >= 1 and at least 2 batches");
    const std::size_t states = state_count(params);
    const auto nb = static_cast<std::size_t>(batches);
    const std::int64_t per_batch = (min_events + batches - 1) / batches;

    std::vector<std::vector<double>> time(nb, std::vector<double>(states, 0.0));
    std::vector<std::int64_t> events(nb, 0), rounds(nb, 0);
    parallel_for(nb, [&](std::size_t j) {
        Rng rng = make_stream(seed, j);
        BumpRound round(params);
        std::size_t opening = 0;
        auto next_opening = [&](const BumpRound::Outcome& o) {
            return o.empty ? std::size_t{0}
                           : state_index(params, {CtmcState::Tag::S, o.end.k, o.end.b, o.end.i});
        };
        for (int warm = 0; warm < 20; ++warm) opening = next_opening(round.run(rng, opening, [](std::size_t, double) {}));
        auto& acc = time[j];
        while (events[j] < per_batch) {
            const auto out = round.run(rng, opening, [&](std::size_t s, double dt) { acc[s] += dt; });
            events[j] += out.events;
            ++rounds[j];
            opening = next_opening(out);
        }
    });

    OccupancyEstimate est;
    est.frequency.assign(states, 0.0);
    est.standard_error.assign(states, 0.0);
    std::vector<double> totals(nb);
    for (std::size_t j = 0; j < nb; ++j) {
        totals[j] = pairwise_sum(time[j]);
        est.events += events[j];
        est.rounds += rounds[j];
    }
    const double grand = pairwise_sum(totals);
    std::vector<double> column(nb);
    for (std::size_t s = 0; s < states; ++s) {
        for (std::size_t j = 0; j < nb; ++j) column[j] = time[j][s];
        est.frequency[s] = pairwise_sum(column) / grand;
        for (std::size_t j = 0; j < nb; ++j) column[j] = time[j][s] / totals[j];
        est.standard_error[s] = mean_se(column).se;
    }
    return est;
}

// ---------------------------------------------------------------------------

std::vector<PostponementRow> paired_postponement_experiment(const Scenario& scenario, const MempoolSnapshot& pool,
                                                            const std::vector<int>& delays, std::int64_t trials,
                                                            std::uint64_t seed) {
    scenario.validate();
    pool.validate();
    check_trials(trials);
    if (!scenario.interval.is_exponential()) throw ConfigError("postponement experiment needs an exponential interval");
    for (int d : delays) {
        if (d < 0) throw ConfigError("delays must be nonnegative");
    }
    const auto n = static_cast<std::size_t>(trials);
    const auto nd = delays.size();
    const double now_fee = ibr_optimize(scenario, pool).fee;

    // [trial][delay]
    std::vector<double> utility(n * nd), fee(n * nd), sent(n * nd);
    parallel_for(n, [&](std::size_t i) {
        Rng rng = make_stream(seed, i);
        const double block = draw_block_time(scenario, pool.elapsed, rng);
        std::vector<double> fees;
        std::vector<double> times;
        append_arrivals(scenario, pool.elapsed, block, rng, fees, &times);

        for (std::size_t k = 0; k < nd; ++k) {
            const auto d = static_cast<std::size_t>(delays[k]);
            const std::size_t slot = i * nd + k;
            if (d > fees.size()) continue;  // block came first
            MempoolSnapshot seen = pool;
            seen.pending_fees.insert(seen.pending_fees.end(), fees.begin(), fees.begin() + static_cast<std::ptrdiff_t>(d));
            double b = now_fee;
            if (d > 0) {
                seen.elapsed = times[d - 1];
                b = ibr_optimize(scenario, seen).fee;
            }
            std::vector<double> rivals = seen.pending_fees;
            rivals.insert(rivals.end(), fees.begin() + static_cast<std::ptrdiff_t>(d), fees.end());
            const bool in = competitors_above(rivals, b, scenario.tie_rule) <= scenario.capacity - 1;
            utility[slot] = in ? scenario.valuation - b : 0.0;
            fee[slot] = b;
            sent[slot] = 1.0;
        }
    });

    std::vector<PostponementRow> rows(nd);
    std::vector<double> u(n), diff(n), f;
    for (std::size_t k = 0; k < nd; ++k) {
        f.clear();
        double sent_count = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = utility[i * nd + k];
            diff[i] = u[i] - utility[i * nd];
            if (sent[i * nd + k] > 0.0) {
                f.push_back(fee[i * nd + k]);
                sent_count += 1.0;
            }
        }
        const auto us = mean_se(u);
        const auto ds = mean_se(diff);
        rows[k] = {delays[k], us.mean, us.se, ds.mean, ds.se, mean_se(f).mean, sent_count / static_cast<double>(n)};
    }
    // gains are measured against the first listed delay
    return rows;
}

std::vector<DelayGain> paired_delay_gain(const Scenario& scenario, const MempoolSnapshot& pool,
                                         const std::vector<double>& fees, const std::vector<double>& delays,
                                         std::int64_t trials, std::uint64_t seed) {
    scenario.validate();
    pool.validate();
    check_trials(trials);
    if (scenario.interval.is_fixed() && pool.elapsed >= scenario.interval.duration()) {
        throw InvalidStateError("fixed-interval block already due at this elapsed time");
    }
    const auto n = static_cast<std::size_t>(trials);
    const std::size_t nf = fees.size();
    const std::size_t nd = delays.size();
    // [trial][fee] inclusion, [trial] block time
    std::vector<double> in_now(n * nf), block_time(n);
    parallel_for(n, [&](std::size_t i) {
        Rng rng = make_stream(seed, i);
        const double block = draw_block_time(scenario, pool.elapsed, rng);
        std::vector<double> rivals = pool.pending_fees;
        append_arrivals(scenario, pool.elapsed, block, rng, rivals);
        block_time[i] = block;
        for (std::size_t f = 0; f < nf; ++f) {
            in_now[i * nf + f] =
                competitors_above(rivals, fees[f], scenario.tie_rule) <= scenario.capacity - 1 ? 1.0 : 0.0;
        }
    });

    std::vector<DelayGain> out;
    std::vector<double> now(n), later(n), diff(n);
    for (std::size_t f = 0; f < nf; ++f) {
        const double v = scenario.valuation - fees[f];
        for (std::size_t k = 0; k < nd; ++k) {
            const double at = pool.elapsed + delays[k];
            for (std::size_t i = 0; i < n; ++i) {
                now[i] = v * in_now[i * nf + f];
                // the rivals are the same whenever the broadcast beats the block
                later[i] = at <= block_time[i] ? now[i] : 0.0;
                diff[i] = later[i] - now[i];
            }
            const auto ls = mean_se(later);
            const auto ds = mean_se(diff);
            out.push_back({fees[f], delays[k], mean_se(now).mean, ls.mean, ls.se, ds.mean, ds.se});
        }
    }
    return out;
}

}  // namespace feetiming
