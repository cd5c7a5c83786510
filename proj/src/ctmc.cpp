#include "feetiming/ctmc.hpp"

#include <algorithm>
#include <cmath>
#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "feetiming/errors.hpp"
#include "feetiming/parallel.hpp"

namespace feetiming {

void CtmcParams::validate() const {
    if (m < 1) throw ConfigError("capacity m must be at least 1");
    if (n <= m) throw ConfigError("need more transactions than block slots (n > m)");
    if (v_hat < 1) throw ConfigError("v_hat must be at least 1");
    for (double r : {gamma, gamma_s, lambda}) {
        if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("rates gamma, gamma_s, lambda must be positive");
    }
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be positive");
}

std::string CtmcState::label() const {
    if (tag == Tag::Zero) return "0";
    return std::string(tag == Tag::Q ? "Q(" : "S(") + std::to_string(k) + "," + std::to_string(b) + "," +
           std::to_string(i) + ")";
}

std::size_t state_count(const CtmcParams& p) {
    return 1 + 2 * static_cast<std::size_t>(p.m) * static_cast<std::size_t>(p.v_hat) *
                   static_cast<std::size_t>(p.m + 1);
}

std::size_t state_index(const CtmcParams& p, const CtmcState& s) {
    if (s.tag == CtmcState::Tag::Zero) return 0;
    if (s.k < 1 || s.k > p.m || s.b < 1 || s.b > p.v_hat || s.i < 0 || s.i > p.m) {
        throw InvalidStateError("state " + s.label() + " outside the state space");
    }
    const std::size_t block = static_cast<std::size_t>(p.m) * static_cast<std::size_t>(p.v_hat) *
                              static_cast<std::size_t>(p.m + 1);
    const std::size_t local = (static_cast<std::size_t>(s.b - 1) * static_cast<std::size_t>(p.m) +
                               static_cast<std::size_t>(s.k - 1)) *
                                  static_cast<std::size_t>(p.m + 1) +
                              static_cast<std::size_t>(s.i);
    return 1 + local + (s.tag == CtmcState::Tag::S ? block : 0);
}

std::vector<CtmcState> enumerate_states(const CtmcParams& p) {
    p.validate();
    std::vector<CtmcState> out;
    out.reserve(state_count(p));
    out.push_back({});
    for (auto tag : {CtmcState::Tag::Q, CtmcState::Tag::S}) {
        for (int b = 1; b <= p.v_hat; ++b) {
            for (int k = 1; k <= p.m; ++k) {
                for (int i = 0; i <= p.m; ++i) out.push_back({tag, k, b, i});
            }
        }
    }
    return out;
}

std::vector<double> BalanceSystem::outflow() const {
    std::vector<double> out(states.size(), 0.0);
    for (const auto& t : transitions) out[t.from] += t.rate;
    return out;
}

BalanceSystem build_balance_system(const CtmcParams& p) {
    BalanceSystem sys;
    sys.params = p;
    sys.states = enumerate_states(p);
    auto idx = [&](const CtmcState& s) { return state_index(p, s); };
    auto add = [&](std::size_t from, const CtmcState& to, double rate) {
        if (rate > 0.0) sys.transitions.push_back({from, idx(to), rate});
    };
    const CtmcState fresh_sp{CtmcState::Tag::Q, 1, 1, 0};
    const CtmcState fresh_other{CtmcState::Tag::Q, 1, 1, 1};
    const double others = static_cast<double>(p.n - 1) * p.gamma;

    for (std::size_t from = 0; from < sys.states.size(); ++from) {
        const CtmcState& s = sys.states[from];
        if (s.tag != CtmcState::Tag::Q) {
            // empty mempool: the first bid opens the round
            add(from, fresh_sp, p.gamma_s);
            add(from, fresh_other, others);
            if (s.tag == CtmcState::Tag::S) add(from, {}, p.lambda);
            continue;
        }

        add(from, {CtmcState::Tag::S, s.k, s.b, s.i}, p.lambda);

        // at level 1 every broadcast fee is in the block; the strategic user
        // has broadcast iff fewer than k ordinary bids followed its own
        const bool sp_broadcast = s.b == 1 ? s.i < s.k : true;
        const bool sp_behind = s.b == 1 ? !sp_broadcast : s.i >= p.m;
        int idle;  // ordinary users without a fee inside the top m
        if (s.b == 1) {
            idle = (p.n - 1) - (s.k - (sp_broadcast ? 1 : 0));
        } else {
            idle = (p.n - 1) - (p.m - (sp_behind ? 0 : 1));
        }
        idle = std::max(idle, 0);

        int nk = s.k + 1;
        int nb = s.b;
        if (s.k == p.m) {
            if (s.b == p.v_hat) continue;  // next bid would exceed the valuation
            nk = 1;
            nb = s.b + 1;
        }
        add(from, {CtmcState::Tag::Q, nk, nb, std::min(s.i + 1, p.m)}, idle * p.gamma);
        if (sp_behind) add(from, {CtmcState::Tag::Q, nk, nb, 0}, p.gamma_s);
    }
    return sys;
}

// ---------------------------------------------------------------------------

double StationaryDistribution::probability(const CtmcState& s) const {
    for (std::size_t j = 0; j < states.size(); ++j) {
        if (states[j] == s) return pi[j];
    }
    throw InvalidStateError("state " + s.label() + " not in distribution");
}

namespace {

double balance_residual(const BalanceSystem& sys, const std::vector<double>& out, const Eigen::VectorXd& pi) {
    Eigen::VectorXd flow = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pi.size()));
    for (const auto& t : sys.transitions) {
        flow[static_cast<Eigen::Index>(t.to)] += pi[static_cast<Eigen::Index>(t.from)] * t.rate;
    }
    for (Eigen::Index j = 0; j < pi.size(); ++j) flow[j] -= pi[j] * out[static_cast<std::size_t>(j)];
    return flow.cwiseAbs().maxCoeff();
}

}  // namespace

StationaryDistribution solve_stationary(const BalanceSystem& sys, const SolverOptions& options) {
    const auto n = static_cast<Eigen::Index>(sys.states.size());
    const std::vector<double> out = sys.outflow();
    for (std::size_t j = 0; j < out.size(); ++j) {
        if (!(out[j] > 0.0)) throw NumericalError("state " + sys.states[j].label() + " is absorbing");
    }

    // A = G^T with row 0 replaced by the normalization row
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(sys.transitions.size() + 2 * static_cast<std::size_t>(n));
    for (const auto& t : sys.transitions) {
        if (t.to != 0 && t.from != t.to) {
            triplets.emplace_back(static_cast<int>(t.to), static_cast<int>(t.from), t.rate);
        }
    }
    for (Eigen::Index j = 1; j < n; ++j) {
        triplets.emplace_back(static_cast<int>(j), static_cast<int>(j), -out[static_cast<std::size_t>(j)]);
    }
    for (Eigen::Index j = 0; j < n; ++j) triplets.emplace_back(0, static_cast<int>(j), 1.0);
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs[0] = 1.0;

    Eigen::VectorXd pi;
    auto refine = [&](auto& solver) {
        pi = solver.solve(rhs);
        for (int step = 0; step < options.refinement_steps; ++step) {
            if (balance_residual(sys, out, pi) <= 0.1 * options.tolerance) break;
            const Eigen::VectorXd r = rhs - a * pi;
            pi += solver.solve(r);
        }
    };
    if (static_cast<std::size_t>(n) <= options.dense_limit) {
        const Eigen::MatrixXd dense(a);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(dense);
        refine(lu);
    } else {
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(a);
        if (lu.info() != Eigen::Success) throw NumericalError("sparse factorization failed: " + lu.lastErrorMessage());
        refine(lu);
    }
    if (!pi.allFinite()) throw NumericalError("stationary solve produced non-finite values");

    const double most_negative = pi.minCoeff();
    if (most_negative < -1e3 * options.tolerance) {
        throw NumericalError("stationary solution has negative mass " + std::to_string(most_negative));
    }
    pi = pi.cwiseMax(0.0);

    StationaryDistribution d;
    d.states = sys.states;
    d.pi.assign(pi.data(), pi.data() + n);
    d.residual = balance_residual(sys, out, pi);
    d.normalization = std::abs(pairwise_sum(d.pi) - 1.0);
    if (d.residual > options.tolerance || d.normalization > options.tolerance) {
        throw NumericalError("stationary solve missed tolerance: residual " + std::to_string(d.residual) +
                             ", normalization error " + std::to_string(d.normalization));
    }
    return d;
}

// ---------------------------------------------------------------------------

double round_payoff(const CtmcParams& p, const CtmcState& s, WinAttribution rule) {
    if (s.tag == CtmcState::Tag::Zero) return 0.0;
    if (s.i <= s.k - 1) return p.v_hat - s.b;
    if (rule == WinAttribution::LevelAware && s.b >= 2 && s.i < p.m) return p.v_hat - s.b + 1;
    return 0.0;
}

double expected_utility_per_round(const CtmcParams& p, const StationaryDistribution& dist, WinAttribution rule) {
    double y = 0.0;
    double rounds = 0.0;
    for (std::size_t j = 0; j < dist.states.size(); ++j) {
        const auto& s = dist.states[j];
        if (s.tag == CtmcState::Tag::Q) continue;
        rounds += dist.pi[j];
        if (s.tag == CtmcState::Tag::S) y += round_payoff(p, s, rule) * dist.pi[j];
    }
    if (!(rounds > 0.0)) throw NumericalError("no mass on round boundaries");
    return p.eta * y / rounds;
}

// ---------------------------------------------------------------------------

SweepVar parse_sweep_var(const std::string& name) {
    if (name == "gamma_s") return SweepVar::GammaS;
    if (name == "gamma") return SweepVar::Gamma;
    if (name == "v_hat") return SweepVar::VHat;
    if (name == "m") return SweepVar::M;
    if (name == "n") return SweepVar::N;
    if (name == "lambda") return SweepVar::Lambda;
    throw ConfigError("unknown sweep variable '" + name + "' (gamma_s, gamma, v_hat, m, n, lambda)");
}

std::string sweep_var_name(SweepVar var) {
    switch (var) {
        case SweepVar::GammaS: return "gamma_s";
        case SweepVar::Gamma: return "gamma";
        case SweepVar::VHat: return "v_hat";
        case SweepVar::M: return "m";
        case SweepVar::N: return "n";
        case SweepVar::Lambda: return "lambda";
    }
    return "?";
}

CtmcParams with_value(CtmcParams p, SweepVar var, double value) {
    auto integer = [&](double x) {
        if (x != std::round(x) || std::abs(x) > 1e6) {
            throw ConfigError(sweep_var_name(var) + " must take integer values");
        }
        return static_cast<int>(x);
    };
    switch (var) {
        case SweepVar::GammaS: p.gamma_s = value; break;
        case SweepVar::Gamma: p.gamma = value; break;
        case SweepVar::Lambda: p.lambda = value; break;
        case SweepVar::VHat: p.v_hat = integer(value); break;
        case SweepVar::M: p.m = integer(value); break;
        case SweepVar::N: p.n = integer(value); break;
    }
    p.validate();
    return p;
}

std::vector<SweepRow> sweep(const CtmcParams& params, SweepVar var, const std::vector<double>& grid) {
    std::vector<CtmcParams> points;
    points.reserve(grid.size());
    for (double v : grid) points.push_back(with_value(params, var, v));
    std::vector<SweepRow> rows(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        const auto sys = build_balance_system(points[i]);
        const auto dist = solve_stationary(sys);
        rows[i] = {grid[i], expected_utility_per_round(points[i], dist), dist.residual, dist.states.size()};
    });
    return rows;
}

}  // namespace feetiming
