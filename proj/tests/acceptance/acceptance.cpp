// Acceptance run: one PASS/FAIL line per criterion, details underneath.
// Exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "feetiming/cli.hpp"
#include "feetiming/ctmc.hpp"
#include "feetiming/errors.hpp"
#include "feetiming/oblivious.hpp"
#include "feetiming/simulator.hpp"

using namespace feetiming;

namespace {

// pinned tolerances
constexpr double kReferenceTol = 0.03;
constexpr double kPerScenarioSeconds = 30.0;
constexpr double kDominanceSlack = 1e-12;
constexpr double kWaitSlack = 1e-9;
constexpr double kSigmaBand = 3.0;
constexpr double kBalanceTol = 1e-10;
constexpr double kSetSeconds = 120.0;
constexpr double kPropertySeconds = 300.0;
constexpr std::int64_t kOccupancyEvents = 10'000'000;
constexpr double kOccupancyMinMass = 1e-4;
constexpr int kRandomScenarios = 1000;
constexpr int kRandomCtmcSets = 100;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void note(const char* fmt, ...) __attribute__((format(printf, 2, 3)));
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            notes.push_back("violation: " + what);
        }
    }
};

void Outcome::note(const char* fmt, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    notes.emplace_back(buf);
}

Scenario ethereum_like(bool linear, double valuation) {
    Scenario s;
    s.interval = BlockIntervalModel::fixed(10.0);
    s.arrivals = linear ? ArrivalProcess::linear(40.0) : ArrivalProcess::poisson(40.0);
    s.fees = FeeDistribution::pareto(1.0, 5.9512);
    s.capacity = 200;
    s.valuation = valuation;
    s.tick = 1e-8;
    return s;
}

int pick(Rng& rng, int lo, int hi) { return lo + static_cast<int>(uniform01(rng) * (hi - lo + 1)); }

double span(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

Scenario random_oblivious(Rng& rng, bool fixed_interval) {
    Scenario s;
    const double beta = span(rng, 0.5, 20.0);
    if (fixed_interval) {
        s.interval = BlockIntervalModel::fixed(span(rng, 1.0, std::max(1.5, 100.0 / beta)));
    } else {
        s.interval = BlockIntervalModel::exponential(span(rng, 0.05, 1.0));
    }
    s.arrivals = uniform01(rng) < 0.5 ? ArrivalProcess::poisson(beta) : ArrivalProcess::linear(beta);
    if (uniform01(rng) < 0.5) {
        s.fees = FeeDistribution::uniform(0.0, 1.0);
        s.valuation = span(rng, 0.2, 1.5);
    } else {
        s.fees = FeeDistribution::pareto(1.0, span(rng, 1.5, 6.0));
        s.valuation = span(rng, 1.1, 8.0);
    }
    s.capacity = pick(rng, 1, 12);
    s.tick = 1e-9 * s.valuation;
    return s;
}

MempoolSnapshot random_pool(const Scenario& s, Rng& rng, double elapsed) {
    MempoolSnapshot p;
    p.elapsed = elapsed;
    const int size = pick(rng, 0, 2 * s.capacity);
    for (int i = 0; i < size; ++i) p.pending_fees.push_back(s.fees.sample(rng));
    return p;
}

// --- 1 -----------------------------------------------------------------------

Outcome reference_nbr_and_baseline() {
    Outcome o;
    const double nbr_lin[] = {0.124, 1.032, 2.007};
    const double base_lin[] = {0.1115, 0.6293, 1.146};
    const double nbr_poi[] = {0.114, 0.980, 1.944};
    const double base_poi[] = {0.111, 0.624, 1.143};
    for (bool linear : {true, false}) {
        const auto t0 = Clock::now();
        for (int k = 0; k < 3; ++k) {
            const double v = 2.0 + k;
            const Scenario s = ethereum_like(linear, v);
            const double n = nbr_optimize(s, 0.0).expected_utility;
            const double b = baseline_decide(s, 0.0).expected_utility;
            const double want_n = linear ? nbr_lin[k] : nbr_poi[k];
            const double want_b = linear ? base_lin[k] : base_poi[k];
            o.note("%s V=%g  NBR %.4f (target %.4f)  baseline %.4f (target %.4f)", linear ? "linear " : "poisson", v, n,
                   want_n, b, want_b);
            o.require(std::abs(n - want_n) <= kReferenceTol, "NBR utility off target");
            o.require(std::abs(b - want_b) <= kReferenceTol, "baseline utility off target");
        }
        const double secs = seconds_since(t0);
        o.note("%s scenario time %.2fs", linear ? "linear " : "poisson", secs);
        o.require(secs < kPerScenarioSeconds, "runtime budget");
    }
    return o;
}

// --- 2 -----------------------------------------------------------------------

Outcome reference_wait_utilities() {
    Outcome o;
    const double lin[] = {0.215, 1.214, 2.212};
    const double poi[] = {0.214, 1.212, 2.211};
    for (bool linear : {true, false}) {
        for (int k = 0; k < 3; ++k) {
            const double v = 2.0 + k;
            const double u = pos_wait_expected_utility(ethereum_like(linear, v), MempoolSnapshot{{}, 0.0});
            const double want = linear ? lin[k] : poi[k];
            o.note("%s V=%g  wait utility %.4f (target %.4f)", linear ? "linear " : "poisson", v, u, want);
            o.require(std::abs(u - want) <= kReferenceTol, "wait utility off target");
        }
    }
    return o;
}

// --- 3 -----------------------------------------------------------------------

Outcome delay_never_pays_pow() {
    Outcome o;
    const auto t0 = Clock::now();
    Rng rng = make_stream(2024, 3);
    long checks = 0, violations = 0;
    double worst = -1.0;
    std::vector<std::pair<Scenario, MempoolSnapshot>> simulated;
    for (int i = 0; i < kRandomScenarios; ++i) {
        const Scenario s = random_oblivious(rng, false);
        const MempoolSnapshot pool = random_pool(s, rng, span(rng, 0.0, 5.0));
        const double mean_interval = 1.0 / s.interval.rate();
        for (int k = 0; k < 20; ++k) {
            const double b = k == 19 ? s.valuation : s.valuation * k / 19.0;
            const double now = (s.valuation - b) * ibr_success_prob(s, pool, b);
            for (double d : {0.05, 0.3, 1.0, 3.0}) {
                const double later = (s.valuation - b) * delayed_success_prob(s, pool, b, d * mean_interval);
                ++checks;
                worst = std::max(worst, later - now);
                if (later > now + kDominanceSlack) ++violations;
            }
        }
        if (simulated.size() < 10 && s.arrivals.rate() * mean_interval <= 40.0) simulated.emplace_back(s, pool);
    }
    o.note("analytic: %ld comparisons, %ld violations, max(later - now) = %.3g", checks, violations, worst);
    o.require(violations == 0, "analytic delayed utility above immediate utility");

    int paired = 0, significant = 0;
    double worst_z = -1e9;
    for (std::size_t j = 0; j < simulated.size(); ++j) {
        const auto& [s, pool] = simulated[j];
        const double mean_interval = 1.0 / s.interval.rate();
        const std::vector<double> fees{0.1 * s.valuation, 0.4 * s.valuation, 0.7 * s.valuation, 0.95 * s.valuation};
        const std::vector<double> delays{0.05 * mean_interval, 0.3 * mean_interval, 1.0 * mean_interval};
        for (const auto& g : paired_delay_gain(s, pool, fees, delays, 100000, 700 + j)) {
            ++paired;
            const double z = g.gain_stderr > 0.0 ? g.gain / g.gain_stderr : (g.gain > 0.0 ? 1e9 : -1e9);
            worst_z = std::max(worst_z, z);
            if (g.gain > kSigmaBand * g.gain_stderr && g.gain > 0.0) ++significant;
        }
    }
    o.note("paired fixed-fee delays: %d comparisons at 1e5 trials, %d significant gains, max z %.2f", paired,
           significant, worst_z);
    o.require(significant == 0, "simulated gain from delaying a fixed fee");

    // re-optimizing after waiting for more arrivals
    int post_sig = 0;
    for (std::size_t j = 0; j < std::min<std::size_t>(2, simulated.size()); ++j) {
        const auto& [s, pool] = simulated[j];
        const auto rows = paired_postponement_experiment(s, pool, {0, 1, 2, 4}, 100000, 900 + j);
        for (std::size_t r = 1; r < rows.size(); ++r) {
            o.note("postponement scenario %zu, wait for %d arrivals: gain %.5f +- %.5f", j, rows[r].delay,
                   rows[r].gain_vs_now, rows[r].gain_stderr);
            if (rows[r].gain_vs_now > kSigmaBand * rows[r].gain_stderr) ++post_sig;
        }
    }
    o.require(post_sig == 0, "simulated gain from postponing the IBR decision");
    const double secs = seconds_since(t0);
    o.note("time %.1fs", secs);
    o.require(secs < kPropertySeconds, "runtime budget");
    return o;
}

// --- 4 -----------------------------------------------------------------------

Outcome wait_dominates_pos() {
    Outcome o;
    const auto t0 = Clock::now();
    Rng rng = make_stream(2024, 4);
    long checks = 0, violations = 0;
    double worst = 1e9;
    for (int i = 0; i < kRandomScenarios; ++i) {
        const Scenario s = random_oblivious(rng, true);
        const double horizon = s.interval.duration();
        for (double frac : {0.0, span(rng, 0.0, 0.95), span(rng, 0.5, 0.99)}) {
            const double t = frac * horizon;
            Rng pool_rng = make_stream(2024, 40000 + static_cast<std::uint64_t>(i));
            const MempoolSnapshot pool = draw_arrivals(s, t, pool_rng).pool_at(t);
            const double wait = pos_wait_expected_utility(s, pool);
            const double instant = ibr_optimize(s, pool).expected_utility;
            ++checks;
            worst = std::min(worst, wait - instant);
            if (wait < instant - kWaitSlack) ++violations;
        }
    }
    o.note("%ld (scenario, t_S) pairs, %ld violations, min(wait - IBR) = %.3g, time %.1fs", checks, violations, worst,
           seconds_since(t0));
    o.require(violations == 0, "IBR utility above wait-to-deadline utility");
    return o;
}

// --- 5 -----------------------------------------------------------------------

Outcome ibr_properties() {
    Outcome o;
    Rng rng = make_stream(2024, 5);
    long mono_checks = 0, mono_bad = 0;
    while (mono_checks < 100000) {
        const Scenario s = random_oblivious(rng, false);
        const MempoolSnapshot pool = random_pool(s, rng, span(rng, 0.0, 5.0));
        for (int k = 0; k < 100; ++k) {
            double b1 = span(rng, 0.0, s.valuation), b2 = span(rng, 0.0, s.valuation);
            if (b1 > b2) std::swap(b1, b2);
            ++mono_checks;
            if (ibr_success_prob(s, pool, b1) > ibr_success_prob(s, pool, b2)) ++mono_bad;
        }
    }
    o.note("win probability monotone in the fee: %ld assertions, %ld violations", mono_checks, mono_bad);
    o.require(mono_bad == 0, "win probability decreased in the fee");

    long v_checks = 0, v_bad = 0, beta_checks = 0, beta_bad = 0, saturated = 0;
    for (int i = 0; i < 200; ++i) {
        Scenario s = random_oblivious(rng, false);
        const MempoolSnapshot pool = random_pool(s, rng, span(rng, 0.0, 5.0));
        const double top = s.valuation;
        double prev_fee = -1.0;
        for (double f : {0.3, 0.5, 0.8, 1.0, 1.5, 2.5}) {
            s.valuation = f * top;
            s.tick = 1e-9 * s.valuation;
            const double fee = ibr_optimize(s, pool).fee;
            ++v_checks;
            if (fee < prev_fee) ++v_bad;
            prev_fee = fee;
        }
        s.valuation = top;
        s.tick = 1e-9 * top;
        // arrival-rate sweep on Poisson arrivals; a bid that clears the whole fee
        // support is untouched by new arrivals and must stay flat instead
        double prev_u = std::numeric_limits<double>::infinity();
        bool prev_clear = false;
        const double beta0 = s.arrivals.rate();
        for (double f : {0.5, 1.0, 2.0, 4.0, 8.0}) {
            Scenario t = s;
            t.arrivals = ArrivalProcess::poisson(f * beta0);
            const auto d = ibr_optimize(t, pool);
            const double u = d.expected_utility;
            const bool clear = t.beat_probability(d.fee) == 0.0;
            if (std::isfinite(prev_u)) {
                ++beta_checks;
                if (u == 0.0 && prev_u == 0.0) {
                    ++saturated;
                } else if (clear && prev_clear) {
                    ++saturated;
                    if (u != prev_u) ++beta_bad;
                } else if (!(u < prev_u)) {
                    ++beta_bad;
                }
            }
            prev_u = u;
            prev_clear = clear;
        }
    }
    o.note("optimal fee nondecreasing in V: %ld steps, %ld violations", v_checks, v_bad);
    o.note("optimized utility decreasing in the Poisson arrival rate: %ld steps, %ld violations "
           "(%ld flat steps at zero utility or with a bid above the whole fee support)",
           beta_checks, beta_bad, saturated);
    o.require(v_bad == 0, "optimal fee fell when V rose");
    o.require(beta_bad == 0, "optimized utility did not fall when arrivals rose");
    return o;
}

// --- 6 -----------------------------------------------------------------------

Outcome ctmc_correctness() {
    Outcome o;
    Rng rng = make_stream(2024, 6);
    double worst_residual = 0.0, worst_norm = 0.0, slowest = 0.0;
    long tested = 0, outside = 0, rare = 0, unreachable_bad = 0;
    double worst_z = 0.0;
    std::size_t biggest = 0;
    for (int set = 0; set < kRandomCtmcSets; ++set) {
        const auto t0 = Clock::now();
        CtmcParams p;
        p.m = pick(rng, 1, 5);
        p.n = pick(rng, p.m + 1, 30);
        p.v_hat = pick(rng, 1, 15);
        p.gamma = span(rng, 0.2, 3.0);
        p.gamma_s = span(rng, 0.2, 8.0);
        p.lambda = span(rng, 0.1, 2.0);
        if (set == 0) p = {30, 5, 15, 1.0, 4.0, 0.5};
        if (set == 1) p = {10, 3, 8, 1.0, 4.0, 0.5};
        const auto dist = solve_stationary(build_balance_system(p));
        biggest = std::max(biggest, dist.states.size());
        worst_residual = std::max(worst_residual, dist.residual);
        worst_norm = std::max(worst_norm, dist.normalization);

        const auto occ = semi_strategic_occupancy(p, kOccupancyEvents, 5000 + static_cast<std::uint64_t>(set));
        for (std::size_t j = 0; j < dist.pi.size(); ++j) {
            if (dist.pi[j] == 0.0) {
                if (occ.frequency[j] != 0.0) ++unreachable_bad;
                continue;
            }
            if (dist.pi[j] < kOccupancyMinMass) {
                ++rare;
                continue;
            }
            ++tested;
            const double z = std::abs(occ.frequency[j] - dist.pi[j]) / occ.standard_error[j];
            worst_z = std::max(worst_z, z);
            if (z > kSigmaBand) ++outside;
        }
        slowest = std::max(slowest, seconds_since(t0));
    }
    // two-sided 3 sigma leaves 0.27% of honest states outside by chance
    const double expected_outside = 0.0027 * static_cast<double>(tested);
    const double allowed_outside = expected_outside + 4.0 * std::sqrt(expected_outside) + 1.0;
    const double bonferroni_z = 5.0;
    o.note("%d sets, up to %zu states: max residual %.2e, max |sum pi - 1| %.2e", kRandomCtmcSets, biggest,
           worst_residual, worst_norm);
    o.note("occupancy (%lld events per set): %ld state tests, %ld outside 3 sigma (%.1f expected by chance, "
           "allowed %.1f), max z %.2f; %ld rare states (pi < %.0e) not z-tested",
           static_cast<long long>(kOccupancyEvents), tested, outside, expected_outside, allowed_outside, worst_z, rare,
           kOccupancyMinMass);
    o.note("slowest set %.1fs", slowest);
    o.require(worst_residual <= kBalanceTol, "balance residual");
    o.require(worst_norm <= kBalanceTol, "normalization");
    o.require(unreachable_bad == 0, "simulation visited a state with zero stationary mass");
    o.require(outside <= allowed_outside, "too many states outside 3 sigma");
    o.require(worst_z < bonferroni_z, "a state far outside its band");
    o.require(slowest < kSetSeconds, "runtime budget");
    return o;
}

// --- 7 -----------------------------------------------------------------------

Outcome bumping_rate_monotone() {
    Outcome o;
    const std::vector<double> grid{0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
    struct Case {
        CtmcParams p;
        bool strict;
    };
    const Case cases[] = {{{2, 1, 6, 1.0, 1.0, 0.5}, true}, {{10, 3, 8, 1.0, 1.0, 0.5}, false}, {{30, 5, 15, 1.0, 1.0, 0.5}, false}};
    for (const auto& c : cases) {
        const auto rows = sweep(c.p, SweepVar::GammaS, grid);
        std::string line;
        double worst_z = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i > 0) {
                const bool ok = c.strict ? rows[i].utility > rows[i - 1].utility : rows[i].utility >= rows[i - 1].utility;
                o.require(ok, "utility not increasing in gamma_s");
            }
            const auto sim = simulate_semi_strategic(with_value(c.p, SweepVar::GammaS, grid[i]), 200000, 70 + i);
            const double z = std::abs(sim.mean_utility - rows[i].utility) / sim.utility_stderr;
            worst_z = std::max(worst_z, z);
            o.require(z <= kSigmaBand, "simulation disagrees with the chain");
            char buf[64];
            std::snprintf(buf, sizeof buf, " %.4f", rows[i].utility);
            line += buf;
        }
        o.note("n=%d m=%d v_hat=%d: utilities%s; simulation max z %.2f", c.p.n, c.p.m, c.p.v_hat, line.c_str(), worst_z);
    }
    return o;
}

// --- 8 -----------------------------------------------------------------------

Outcome parameter_trends() {
    Outcome o;
    const CtmcParams base{10, 3, 8, 1.0, 4.0, 0.5};
    struct Trend {
        SweepVar var;
        std::vector<double> grid;
        int sign;
    };
    const Trend trends[] = {{SweepVar::VHat, {4, 6, 8, 10, 12}, +1},
                            {SweepVar::M, {1, 2, 3, 4, 5}, +1},
                            {SweepVar::Gamma, {0.25, 0.5, 1, 2, 4}, -1},
                            {SweepVar::N, {6, 8, 10, 12, 14}, -1}};
    for (const auto& t : trends) {
        const auto rows = sweep(base, t.var, t.grid);
        std::string line;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i > 0) o.require((rows[i].utility - rows[i - 1].utility) * t.sign > 0.0, "trend broken");
            char buf[64];
            std::snprintf(buf, sizeof buf, " %.4f", rows[i].utility);
            line += buf;
        }
        o.note("%s (%s): %s", sweep_var_name(t.var).c_str(), t.sign > 0 ? "increasing" : "decreasing", line.c_str());
    }
    return o;
}

// --- 9 -----------------------------------------------------------------------

std::string run_tool(std::vector<std::string> args, const char* threads, int& code) {
    ::setenv("FEETIMING_THREADS", threads, 1);
    args.insert(args.begin(), "feetiming");
    std::ostringstream out, err;
    code = run_cli(args, out, err);
    ::unsetenv("FEETIMING_THREADS");
    return out.str();
}

Outcome determinism() {
    Outcome o;
    const std::string dir = FEETIMING_SOURCE_DIR "/scenarios/";
    const std::vector<std::vector<std::string>> invocations{
        {"simulate", "--scenario", dir + "bitcoin_poisson.yaml", "--policy", "nbr", "--elapsed", "5", "--trials", "20000", "--seed", "3"},
        {"simulate", "--scenario", dir + "bumping.yaml", "--policy", "ibr", "--elapsed", "1", "--trials", "5000", "--seed", "4"},
        {"simulate", "--scenario", dir + "ethereum_poisson.yaml", "--policy", "fbr", "--elapsed", "2", "--trials", "5000", "--seed", "5", "--pool", "3,2,7"},
        {"simulate", "--scenario", dir + "ethereum_linear.yaml", "--trials", "5000", "--seed", "6"},
        {"simulate", "--scenario", dir + "bumping.yaml", "--mode", "semi", "--trials", "20000", "--seed", "7", "--sweep", "gamma_s=1,2,4"},
    };
    for (const auto& args : invocations) {
        int c1 = 0, c2 = 0, c3 = 0;
        const std::string a = run_tool(args, "1", c1);
        const std::string b = run_tool(args, "1", c2);
        const std::string c = run_tool(args, "4", c3);
        const bool ok = c1 == 0 && c2 == 0 && c3 == 0 && a == b && a == c && !a.empty();
        const std::string file = args[2].substr(args[2].rfind('/') + 1);
        const std::string what = args[3] == "--policy" ? args[4] : args[3] == "--mode" ? args[4] : "baseline";
        o.note("%s %s: %s", file.c_str(), what.c_str(),
               ok ? "identical bytes across repeats and 1 vs 4 workers" : "MISMATCH");
        o.require(ok, "simulate output differs");
    }
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* title;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "reference NBR and baseline utilities, fixed interval", reference_nbr_and_baseline},
        {2, "reference wait-to-deadline utilities, fixed interval", reference_wait_utilities},
        {3, "delaying a broadcast never pays, exponential interval", delay_never_pays_pow},
        {4, "waiting dominates instant bidding, fixed interval", wait_dominates_pos},
        {5, "IBR monotonicity properties, exponential interval", ibr_properties},
        {6, "bumping chain: balance, normalization, occupancy", ctmc_correctness},
        {7, "utility rises with the strategic bumping rate; chain matches simulation", bumping_rate_monotone},
        {8, "utility trends in v_hat, m, gamma, n", parameter_trends},
        {9, "simulate output is byte-identical across repeats and worker counts", determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.notes.push_back(std::string("exception: ") + e.what());
        }
        std::printf("criterion %d: %s  %s  (%.1fs)\n", c.id, o.pass ? "PASS" : "FAIL", c.title, seconds_since(t0));
        for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed;
}
