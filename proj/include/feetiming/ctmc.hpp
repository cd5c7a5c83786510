#pragma once

// Fee-bumping game between n-1 semi-strategic users and the strategic user,
// as a continuous-time Markov chain over mempool summaries.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace feetiming {

struct CtmcParams {
    int n = 2;             // transactions per round, strategic one included
    int m = 1;             // block capacity
    int v_hat = 2;         // valuation in bump increments
    double gamma = 1.0;    // observation rate of each ordinary user
    double gamma_s = 1.0;  // bumping rate of the strategic user
    double lambda = 1.0;   // block rate
    double eta = 1.0;      // bump increment in fee units

    /// Throws ConfigError.
    void validate() const;
    bool operator==(const CtmcParams&) const = default;
};

struct CtmcState {
    enum class Tag : std::uint8_t { Zero, Q, S };
    Tag tag = Tag::Zero;
    int k = 0;  // transactions at the top fee level
    int b = 0;  // top fee level
    int i = 0;  // ordinary bids since the strategic user's last bid, capped at m

    std::string label() const;
    bool operator==(const CtmcState&) const = default;
};

/// 1 + 2 m v_hat (m + 1) states: Zero, then Q ordered by (b, k, i), then S.
std::vector<CtmcState> enumerate_states(const CtmcParams& params);
std::size_t state_count(const CtmcParams& params);
std::size_t state_index(const CtmcParams& params, const CtmcState& state);

struct Transition {
    std::size_t from;
    std::size_t to;
    double rate;
};

/// Off-diagonal transition rates. The balance system is pi G = 0 with the
/// generator G built from these; solve_stationary swaps one balance row for
/// the normalization row.
struct BalanceSystem {
    CtmcParams params;
    std::vector<CtmcState> states;
    std::vector<Transition> transitions;

    /// Total outflow rate of each state.
    std::vector<double> outflow() const;
};

BalanceSystem build_balance_system(const CtmcParams& params);

struct StationaryDistribution {
    std::vector<CtmcState> states;
    std::vector<double> pi;
    double residual = 0.0;       // max |(pi G)_j|
    double normalization = 0.0;  // |sum pi - 1|

    double probability(const CtmcState& s) const;
};

struct SolverOptions {
    std::size_t dense_limit = 3000;  // sparse LU above this many states
    double tolerance = 1e-10;
    int refinement_steps = 8;
};

/// Throws NumericalError when the residual tolerance cannot be met.
StationaryDistribution solve_stationary(const BalanceSystem& system, const SolverOptions& options = {});

/// How a finished round pays the strategic user.
enum class WinAttribution : std::uint8_t {
    LevelAware,    // in the top m: pays its own level (b, or b-1 when k <= i < m)
    TopLevelOnly,  // diagnostic: paid only when holding one of the k top-level slots
};

/// Payoff (in increments) when the block arrives in Q-state `s`.
double round_payoff(const CtmcParams& params, const CtmcState& s, WinAttribution rule = WinAttribution::LevelAware);

/// eta * Y / (sum of S mass + pi(0)); equals the expected payoff per round.
double expected_utility_per_round(const CtmcParams& params, const StationaryDistribution& dist,
                                  WinAttribution rule = WinAttribution::LevelAware);

enum class SweepVar : std::uint8_t { GammaS, Gamma, VHat, M, N, Lambda };

SweepVar parse_sweep_var(const std::string& name);
std::string sweep_var_name(SweepVar var);

struct SweepRow {
    double value = 0.0;
    double utility = 0.0;
    double residual = 0.0;
    std::size_t state_count = 0;
};

CtmcParams with_value(CtmcParams params, SweepVar var, double value);

std::vector<SweepRow> sweep(const CtmcParams& params, SweepVar var, const std::vector<double>& grid);

}  // namespace feetiming
