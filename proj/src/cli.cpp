#include "feetiming/cli.hpp"

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "feetiming/ctmc.hpp"
#include "feetiming/errors.hpp"
#include "feetiming/oblivious.hpp"
#include "feetiming/scenario_io.hpp"
#include "feetiming/simulator.hpp"

namespace feetiming {

namespace {

constexpr const char* kVersion = "0.1.0";

struct Common {
    std::string scenario_path;
    std::uint64_t seed = 1;
    std::int64_t trials = 100000;
    std::string out_path;
    std::string format = "csv";
    std::optional<double> valuation;
};

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

    std::string render(const std::string& meta) const {
        std::ostringstream o;
        o << "# " << meta << "\n";
        write_row(o, header_);
        for (const auto& r : rows_) write_row(o, r);
        return o.str();
    }

private:
    static void write_row(std::ostream& o, const std::vector<std::string>& r) {
        for (std::size_t i = 0; i < r.size(); ++i) o << (i ? "," : "") << r[i];
        o << "\n";
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

ScenarioFile load(const Common& c) {
    ScenarioFile f = load_scenario(c.scenario_path);
    if (c.valuation) {
        f.scenario.valuation = *c.valuation;
        f.scenario.validate();
    }
    return f;
}

// hash of everything that determines the numbers in the table
std::string meta_line(const std::string& command, const Common& c, const ScenarioFile& f,
                      const std::string& options) {
    const std::uint64_t h = fnv1a64(command + "\n" + serialize_scenario(f) + options);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string("feetiming ") + kVersion + " command=" + command + " seed=" + std::to_string(c.seed) +
           " config=" + buf;
}

void emit(const Common& c, const std::string& text, std::ostream& out) {
    if (c.format != "csv") throw ConfigError("unsupported format '" + c.format + "' (csv)");
    if (c.out_path.empty() || c.out_path == "-") {
        out << text;
        return;
    }
    std::ofstream file(c.out_path, std::ios::binary);
    if (!file) throw ConfigError("cannot write '" + c.out_path + "'");
    file << text;
}

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// malformed option values are usage errors, not model errors
template <class F>
auto option_value(const std::string& flag, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw UsageError(flag + ": " + e.what());
    } catch (const DomainError& e) {
        throw UsageError(flag + ": " + e.what());
    }
}

struct SweepSpec {
    SweepVar var;
    std::vector<double> values;
};

std::optional<SweepSpec> parse_sweep(const std::string& spec) {
    if (spec.empty()) return std::nullopt;
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError("sweep must look like var=v1,v2 or var=lo:hi:step");
    return SweepSpec{parse_sweep_var(spec.substr(0, eq)), parse_grid(spec.substr(eq + 1))};
}

void add_common(CLI::App* app, Common& c, bool with_trials) {
    app->add_option("--scenario", c.scenario_path, "Scenario file (YAML)")->required();
    app->add_option("--seed", c.seed, "Master seed")->capture_default_str();
    if (with_trials) app->add_option("--trials", c.trials, "Monte Carlo trials")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--out", c.out_path, "Write the CSV here instead of standard output");
    app->add_option("--format", c.format, "Output format (csv)")->capture_default_str();
    app->add_option("--valuation", c.valuation, "Override the scenario valuation V");
}

StrategyDecision decide(const Scenario& s, const Strategy& st, double elapsed, const MempoolSnapshot& pool) {
    switch (st.kind) {
        case StrategyKind::NBR: return nbr_optimize(s, elapsed);
        case StrategyKind::IBR: return ibr_optimize(s, pool);
        case StrategyKind::FBR: return fbr_decide(s, pool);
        case StrategyKind::AverageBaseline: return baseline_decide(s, elapsed);
        case StrategyKind::FixedFee: return fixed_fee_decide(s, elapsed, st.fixed_fee);
    }
    throw ConfigError("unknown strategy");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fee and timing strategies for a single strategic transaction in a mempool"};
    app.name("feetiming");
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Common eval_c, curve_c, ctmc_c, sim_c;
    std::string eval_strategy = "nbr", eval_pool;
    double eval_elapsed = 0.0;
    auto* eval = app.add_subcommand("eval", "Optimal fee and expected utility of one strategy");
    add_common(eval, eval_c, false);
    eval->add_option("--strategy", eval_strategy, "nbr | ibr | fbr | baseline | fixed:<fee|V>")->capture_default_str();
    eval->add_option("--elapsed", eval_elapsed, "Time since the last block")->capture_default_str();
    eval->add_option("--pool", eval_pool, "Pending fees: inline list, CSV path or draw:<seed>");

    std::string curve_strategy = "nbr", curve_grid;
    int curve_draws = 200;
    auto* curve = app.add_subcommand("curve", "Expected utility over a grid of elapsed times");
    add_common(curve, curve_c, false);
    curve->add_option("--strategy", curve_strategy, "nbr | ibr | fbr | baseline | fixed:<fee|V>")->capture_default_str();
    curve->add_option("--grid", curve_grid, "Elapsed times: t1,t2,... or lo:hi:step")->required();
    curve->add_option("--draws", curve_draws, "Pool draws per point for ibr/fbr")->capture_default_str()->check(CLI::PositiveNumber);

    std::string ctmc_sweep;
    auto* ctmc = app.add_subcommand("ctmc", "Stationary utility of the fee-bumping game");
    add_common(ctmc, ctmc_c, false);
    ctmc->add_option("--sweep", ctmc_sweep, "var=values with var in gamma_s, gamma, v_hat, m, n, lambda");

    std::string sim_mode = "oblivious", sim_policy = "baseline", sim_pool, sim_sweep;
    double sim_elapsed = 0.0;
    auto* sim = app.add_subcommand("simulate", "Monte Carlo estimate of the strategic user's utility");
    add_common(sim, sim_c, true);
    sim->add_option("--mode", sim_mode, "oblivious | semi")->capture_default_str()->check(CLI::IsMember({"oblivious", "semi"}));
    sim->add_option("--policy", sim_policy, "Oblivious mode: nbr | ibr | fbr | baseline | fixed:<fee|V>")->capture_default_str();
    sim->add_option("--elapsed", sim_elapsed, "Oblivious mode: time since the last block")->capture_default_str();
    sim->add_option("--pool", sim_pool, "Oblivious mode: fix the pending pool instead of drawing it");
    sim->add_option("--sweep", sim_sweep, "Semi mode: var=values, as for ctmc");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitParse;
    }

    try {
        if (eval->parsed()) {
            const ScenarioFile f = load(eval_c);
            const Strategy st = option_value("--strategy", [&] { return Strategy::parse(eval_strategy, f.scenario.valuation); });
            const MempoolSnapshot pool = option_value("--pool", [&] { return parse_pool_spec(eval_pool, f.scenario, eval_elapsed); });
            const StrategyDecision d = decide(f.scenario, st, eval_elapsed, pool);
            CsvTable t({"strategy", "elapsed", "pool_size", "fee", "broadcast_time", "utility", "win_prob"});
            t.add({st.name(), fmt(eval_elapsed), std::to_string(pool.pending_fees.size()), fmt(d.fee),
                   fmt(d.broadcast_time), fmt(d.expected_utility), fmt(d.inclusion_probability)});
            std::string opts = st.name() + " " + fmt(eval_elapsed);
            for (double x : pool.pending_fees) opts += " " + fmt(x);
            emit(eval_c, t.render(meta_line("eval", eval_c, f, opts)), out);
        } else if (curve->parsed()) {
            const ScenarioFile f = load(curve_c);
            const Strategy st = option_value("--strategy", [&] { return Strategy::parse(curve_strategy, f.scenario.valuation); });
            const auto grid = option_value("--grid", [&] { return parse_grid(curve_grid); });
            const auto points = utility_vs_elapsed_curve(f.scenario, st, grid, {curve_draws, curve_c.seed});
            CsvTable t({"elapsed", "utility", "utility_stderr", "fee", "win_prob"});
            for (const auto& p : points) {
                t.add({fmt(p.elapsed), fmt(p.utility), fmt(p.utility_stderr), fmt(p.fee), fmt(p.win_prob)});
            }
            emit(curve_c, t.render(meta_line("curve", curve_c, f, st.name() + " " + curve_grid + " " +
                                                                       std::to_string(curve_draws))),
                 out);
        } else if (ctmc->parsed()) {
            const ScenarioFile f = load(ctmc_c);
            if (!f.semi) throw ConfigError("scenario has no semi_strategic section");
            const auto sw = option_value("--sweep", [&] { return parse_sweep(ctmc_sweep); });
            const SweepVar var = sw ? sw->var : SweepVar::GammaS;
            const std::vector<double> values = sw ? sw->values : std::vector<double>{f.semi->gamma_s};
            CsvTable t({"variable", "value", "utility", "residual", "state_count"});
            for (const auto& r : sweep(*f.semi, var, values)) {
                t.add({sweep_var_name(var), fmt(r.value), fmt(r.utility), fmt(r.residual), std::to_string(r.state_count)});
            }
            emit(ctmc_c, t.render(meta_line("ctmc", ctmc_c, f, ctmc_sweep)), out);
        } else if (sim->parsed()) {
            const ScenarioFile f = load(sim_c);
            if (sim_mode == "oblivious") {
                const Strategy st = option_value("--policy", [&] { return Strategy::parse(sim_policy, f.scenario.valuation); });
                std::optional<MempoolSnapshot> pool;
                if (!sim_pool.empty()) pool = option_value("--pool", [&] { return parse_pool_spec(sim_pool, f.scenario, sim_elapsed); });
                const auto r = simulate_oblivious(f.scenario, st, sim_elapsed, sim_c.trials, sim_c.seed, pool);
                CsvTable t({"policy", "elapsed", "trials", "seed", "mean_utility", "utility_stderr", "inclusion_rate",
                            "mean_fee"});
                t.add({st.name(), fmt(sim_elapsed), std::to_string(r.trials), std::to_string(r.seed), fmt(r.mean_utility),
                       fmt(r.utility_stderr), fmt(r.inclusion_rate), fmt(r.mean_fee)});
                std::string opts = "oblivious " + st.name() + " " + fmt(sim_elapsed) + " " + std::to_string(sim_c.trials);
                if (pool) {
                    for (double x : pool->pending_fees) opts += " " + fmt(x);
                }
                emit(sim_c, t.render(meta_line("simulate", sim_c, f, opts)), out);
            } else {
                if (!f.semi) throw ConfigError("scenario has no semi_strategic section");
                const auto sw = option_value("--sweep", [&] { return parse_sweep(sim_sweep); });
                const SweepVar var = sw ? sw->var : SweepVar::GammaS;
                const std::vector<double> values = sw ? sw->values : std::vector<double>{f.semi->gamma_s};
                CsvTable t({"variable", "value", "trials", "seed", "mean_utility", "utility_stderr", "inclusion_rate",
                            "mean_fee"});
                for (double v : values) {
                    const auto r = simulate_semi_strategic(with_value(*f.semi, var, v), sim_c.trials, sim_c.seed);
                    t.add({sweep_var_name(var), fmt(v), std::to_string(r.trials), std::to_string(r.seed),
                           fmt(r.mean_utility), fmt(r.utility_stderr), fmt(r.inclusion_rate), fmt(r.mean_fee)});
                }
                emit(sim_c, t.render(meta_line("simulate", sim_c, f, "semi " + sim_sweep + " " + std::to_string(sim_c.trials))),
                     out);
            }
        }
    } catch (const ParseError& e) {
        err << "feetiming: parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const UsageError& e) {
        err << "feetiming: " << e.what() << "\n";
        return kExitParse;
    } catch (const NumericalError& e) {
        err << "feetiming: numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const ConfigError& e) {
        err << "feetiming: " << e.what() << "\n";
        return kExitDomain;
    } catch (const DomainError& e) {
        err << "feetiming: " << e.what() << "\n";
        return kExitDomain;
    } catch (const InvalidStateError& e) {
        err << "feetiming: " << e.what() << "\n";
        return kExitDomain;
    } catch (const std::exception& e) {
        err << "feetiming: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitOk;
}

}  // namespace feetiming
