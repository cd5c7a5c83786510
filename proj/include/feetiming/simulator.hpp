#pragma once

// Event-level Monte Carlo for both user schemes.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "feetiming/ctmc.hpp"
#include "feetiming/model.hpp"
#include "feetiming/oblivious.hpp"

namespace feetiming {

struct SimulationReport {
    std::int64_t trials = 0;
    double mean_utility = 0.0;
    double utility_stderr = 0.0;
    double inclusion_rate = 0.0;
    double mean_fee = 0.0;  // average fee over included trials, 0 if none
    std::uint64_t seed = 0;
    double wall_time = 0.0;  // seconds; not part of any reproducible output
};

/// Summary of per-trial values; reduction order is fixed by trial index.
SimulationReport summarize(const std::vector<double>& utility, const std::vector<double>& included,
                           const std::vector<double>& fee, std::uint64_t seed);

using ObliviousPolicy = Strategy;

/// One round per trial from elapsed time `elapsed`: the block time, the
/// arrival stream and (unless `pool` is given) the past pool are drawn, the
/// policy picks fee and broadcast time, and inclusion follows the top-m rule.
SimulationReport simulate_oblivious(const Scenario& scenario, const ObliviousPolicy& policy, double elapsed,
                                    std::int64_t trials, std::uint64_t seed,
                                    const std::optional<MempoolSnapshot>& pool = std::nullopt);

/// Rounds of the fee-bumping game with every user acting on its own clock.
SimulationReport simulate_semi_strategic(const CtmcParams& params, std::int64_t trials, std::uint64_t seed);

struct OccupancyEstimate {
    std::vector<double> frequency;  // time fraction per state index
    std::vector<double> standard_error;  // batch means
    std::int64_t events = 0;
    std::int64_t rounds = 0;
};

/// Time share of each chain state along a simulated event stream of at
/// least `min_events` events. The empty mempool at the start of a round is
/// booked to S(state at the previous block), or to Zero after an empty round.
OccupancyEstimate semi_strategic_occupancy(const CtmcParams& params, std::int64_t min_events, std::uint64_t seed,
                                           int batches = 200);

struct PostponementRow {
    int delay = 0;              // interim arrivals observed before broadcasting
    double mean_utility = 0.0;
    double utility_stderr = 0.0;
    double gain_vs_now = 0.0;   // paired mean of utility(delay) - utility(0)
    double gain_stderr = 0.0;
    double mean_fee = 0.0;      // mean optimized fee among trials that broadcast
    double broadcast_rate = 0.0;
};

/// The strategic user waits for `delay` new arrivals, then plays IBR on the
/// pool it sees. All delays share each trial's block time and arrival stream.
std::vector<PostponementRow> paired_postponement_experiment(const Scenario& scenario, const MempoolSnapshot& pool,
                                                            const std::vector<int>& delays, std::int64_t trials,
                                                            std::uint64_t seed);

struct DelayGain {
    double fee = 0.0;
    double delay = 0.0;       // time units
    double now_utility = 0.0;
    double delayed_utility = 0.0;
    double delayed_stderr = 0.0;
    double gain = 0.0;        // mean of utility(delayed) - utility(now)
    double gain_stderr = 0.0;
};

/// Fixed fee b broadcast at pool.elapsed versus pool.elapsed + delay, with
/// common block times and arrival streams.
std::vector<DelayGain> paired_delay_gain(const Scenario& scenario, const MempoolSnapshot& pool,
                                         const std::vector<double>& fees, const std::vector<double>& delays,
                                         std::int64_t trials, std::uint64_t seed);

}  // namespace feetiming
