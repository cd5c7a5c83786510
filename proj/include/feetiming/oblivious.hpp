#pragma once

// Fee and broadcast-time strategies against mempool-oblivious ordinary users.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "feetiming/count_law.hpp"
#include "feetiming/model.hpp"

namespace feetiming {

struct StrategyDecision {
    double fee = 0.0;
    double broadcast_time = 0.0;
    double expected_utility = 0.0;
    double inclusion_probability = 0.0;
};

enum class StrategyKind : std::uint8_t { NBR, IBR, FBR, AverageBaseline, FixedFee };

struct Strategy {
    StrategyKind kind = StrategyKind::NBR;
    double fixed_fee = 0.0;  // FixedFee only

    static Strategy parse(const std::string& text, double valuation);
    std::string name() const;
};

// --- naive best response ---------------------------------------------------

double nbr_success_prob(const Scenario& scenario, double elapsed, double b);
StrategyDecision nbr_optimize(const Scenario& scenario, double elapsed);

// --- instant best response -------------------------------------------------

double ibr_success_prob(const Scenario& scenario, const MempoolSnapshot& pool, double b);
StrategyDecision ibr_optimize(const Scenario& scenario, const MempoolSnapshot& pool);

// --- farsighted best response ----------------------------------------------

/// Exponential interval: the IBR decision, broadcast at once. Fixed interval:
/// wait until the deadline and bid the final threshold (plus one tick when the
/// strategic user loses ties); the reported fee is the expected fee paid given inclusion.
StrategyDecision fbr_decide(const Scenario& scenario, const MempoolSnapshot& pool);

/// E[max(V - b^m - premium, 0)] for the fixed-interval wait policy, where b^m is
/// the threshold of the final pool (pending fees plus arrivals up to the deadline).
double pos_wait_expected_utility(const Scenario& scenario, const MempoolSnapshot& pool);

/// P(b^m <= x) for the final pool of a fixed-interval round.
double pos_threshold_cdf(const Scenario& scenario, const MempoolSnapshot& pool, double x);

/// Fee the wait policy pays on the realized final pool; empty when it abstains.
std::optional<double> pos_wait_fee(const Scenario& scenario, const MempoolSnapshot& final_pool);

/// Inclusion probability, seen from pool.elapsed, of broadcasting fee b after
/// `delay` more time units. Interim arrivals are integrated out and the block
/// may come during the delay.
double delayed_success_prob(const Scenario& scenario, const MempoolSnapshot& pool, double b,
                            double delay);

// --- reference strategies --------------------------------------------------

/// E[b^m] over a whole round (0 when fewer than m arrive).
double expected_round_threshold(const Scenario& scenario);

/// Bid the mean round threshold; abstain (zero utility) when it exceeds V.
StrategyDecision baseline_decide(const Scenario& scenario, double elapsed);

StrategyDecision fixed_fee_decide(const Scenario& scenario, double elapsed, double fee);

// --- curves ----------------------------------------------------------------

struct CurveOptions {
    int draws = 200;          // pool realizations per grid point (IBR / FBR)
    std::uint64_t seed = 1;
};

struct CurvePoint {
    double elapsed = 0.0;
    double utility = 0.0;
    double utility_stderr = 0.0;
    double fee = 0.0;
    double win_prob = 0.0;
};

/// Pool-dependent strategies are averaged over pools drawn from the arrival
/// process; draw d is shared by all grid points (its pool at t is the prefix of
/// one arrival stream).
std::vector<CurvePoint> utility_vs_elapsed_curve(const Scenario& scenario, const Strategy& strategy,
                                                 const std::vector<double>& grid,
                                                 const CurveOptions& options = {});

/// Arrival stream of one round up to `horizon`, fees i.i.d. from the scenario.
struct ArrivalStream {
    std::vector<double> times;
    std::vector<double> fees;
    double linear_rate = 0.0;  // nonzero for linear arrivals

    MempoolSnapshot pool_at(double t) const;
};

ArrivalStream draw_arrivals(const Scenario& scenario, double horizon, Rng& rng);

// --- optimizer -------------------------------------------------------------

struct OptimizerOptions {
    int grid_points = 512;
    int refine_top = 4;
};

/// Maximizes (V - b) * win(b) over [0, V]. `breaks` are the points where
/// win may jump; it is right-continuous under the strategic-wins tie rule and
/// left-continuous otherwise.
template <class WinFn>
StrategyDecision maximize_fee(const Scenario& scenario, WinFn&& win, std::vector<double> breaks,
                              const OptimizerOptions& options = {});

}  // namespace feetiming

#include "feetiming/detail/optimizer.tpp"
