#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "feetiming/ctmc.hpp"
#include "feetiming/errors.hpp"
#include "feetiming/oblivious.hpp"
#include "feetiming/scenario_io.hpp"
#include "feetiming/simulator.hpp"

namespace py = pybind11;
using namespace feetiming;

namespace {

MempoolSnapshot pool_of(const std::vector<double>& fees, double elapsed) {
    MempoolSnapshot p;
    p.pending_fees = fees;
    p.elapsed = elapsed;
    return p;
}

Scenario make_scenario(const std::string& interval, double interval_param, const std::string& arrivals,
                       double arrival_rate, const std::string& fees, const std::vector<double>& fee_params,
                       int capacity, double valuation, double tick) {
    Scenario s;
    if (interval == "exponential") {
        s.interval = BlockIntervalModel::exponential(interval_param);
    } else if (interval == "fixed") {
        s.interval = BlockIntervalModel::fixed(interval_param);
    } else {
        throw ConfigError("interval must be 'exponential' or 'fixed'");
    }
    if (arrivals == "linear") {
        s.arrivals = ArrivalProcess::linear(arrival_rate);
    } else if (arrivals == "poisson") {
        s.arrivals = ArrivalProcess::poisson(arrival_rate);
    } else {
        throw ConfigError("arrivals must be 'linear' or 'poisson'");
    }
    if (fees == "pareto" || fees == "uniform") {
        if (fee_params.size() != 2) throw ConfigError(fees + " fees take two parameters");
        s.fees = fees == "pareto" ? FeeDistribution::pareto(fee_params[0], fee_params[1])
                                  : FeeDistribution::uniform(fee_params[0], fee_params[1]);
    } else if (fees == "empirical") {
        s.fees = FeeDistribution::empirical(fee_params);
    } else {
        throw ConfigError("fees must be 'pareto', 'uniform' or 'empirical'");
    }
    s.capacity = capacity;
    s.valuation = valuation;
    s.tick = tick;
    s.validate();
    return s;
}

}  // namespace

PYBIND11_MODULE(_feetiming, m) {
    m.doc() = "Fee and broadcast-time strategies for a strategic mempool user";

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<InvalidStateError>(m, "InvalidStateError", PyExc_RuntimeError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<Scenario>(m, "Scenario")
        .def(py::init(&make_scenario), py::arg("interval"), py::arg("interval_param"), py::arg("arrivals"),
             py::arg("arrival_rate"), py::arg("fees"), py::arg("fee_params"), py::arg("capacity"),
             py::arg("valuation"), py::arg("tick") = 1e-8)
        .def_readwrite("capacity", &Scenario::capacity)
        .def_readwrite("valuation", &Scenario::valuation)
        .def_readwrite("tick", &Scenario::tick)
        .def("fee_cdf", [](const Scenario& s, double b) { return s.fees.cdf(b); })
        .def("__eq__", [](const Scenario& a, const Scenario& b) { return a == b; });

    py::class_<CtmcParams>(m, "CtmcParams")
        .def(py::init([](int n, int m_, int v_hat, double gamma, double gamma_s, double lambda, double eta) {
                 CtmcParams p{n, m_, v_hat, gamma, gamma_s, lambda, eta};
                 p.validate();
                 return p;
             }),
             py::arg("n"), py::arg("m"), py::arg("v_hat"), py::arg("gamma"), py::arg("gamma_s"), py::arg("lambda_"),
             py::arg("eta") = 1.0)
        .def_readwrite("n", &CtmcParams::n)
        .def_readwrite("m", &CtmcParams::m)
        .def_readwrite("v_hat", &CtmcParams::v_hat)
        .def_readwrite("gamma", &CtmcParams::gamma)
        .def_readwrite("gamma_s", &CtmcParams::gamma_s)
        .def_readwrite("lambda_", &CtmcParams::lambda)
        .def_readwrite("eta", &CtmcParams::eta)
        .def("__repr__", [](const CtmcParams& p) {
            return "CtmcParams(n=" + std::to_string(p.n) + ", m=" + std::to_string(p.m) +
                   ", v_hat=" + std::to_string(p.v_hat) + ")";
        });

    py::class_<ScenarioFile>(m, "ScenarioFile")
        .def_readonly("scenario", &ScenarioFile::scenario)
        .def_readonly("semi", &ScenarioFile::semi)
        .def("serialize", &serialize_scenario);
    m.def("load_scenario", &load_scenario, py::arg("path"));
    m.def("parse_scenario", &parse_scenario, py::arg("text"));

    py::class_<StrategyDecision>(m, "StrategyDecision")
        .def_readonly("fee", &StrategyDecision::fee)
        .def_readonly("broadcast_time", &StrategyDecision::broadcast_time)
        .def_readonly("expected_utility", &StrategyDecision::expected_utility)
        .def_readonly("inclusion_probability", &StrategyDecision::inclusion_probability)
        .def("__repr__", [](const StrategyDecision& d) {
            return "StrategyDecision(fee=" + std::to_string(d.fee) + ", utility=" + std::to_string(d.expected_utility) + ")";
        });

    m.def("nbr", &nbr_optimize, py::arg("scenario"), py::arg("elapsed") = 0.0);
    m.def("nbr_success_prob", &nbr_success_prob, py::arg("scenario"), py::arg("elapsed"), py::arg("fee"));
    m.def("ibr", [](const Scenario& s, const std::vector<double>& pool, double elapsed) {
        return ibr_optimize(s, pool_of(pool, elapsed));
    }, py::arg("scenario"), py::arg("pool"), py::arg("elapsed") = 0.0);
    m.def("ibr_success_prob", [](const Scenario& s, const std::vector<double>& pool, double elapsed, double b) {
        return ibr_success_prob(s, pool_of(pool, elapsed), b);
    }, py::arg("scenario"), py::arg("pool"), py::arg("elapsed"), py::arg("fee"));
    m.def("fbr", [](const Scenario& s, const std::vector<double>& pool, double elapsed) {
        return fbr_decide(s, pool_of(pool, elapsed));
    }, py::arg("scenario"), py::arg("pool"), py::arg("elapsed") = 0.0);
    m.def("wait_utility", [](const Scenario& s, const std::vector<double>& pool, double elapsed) {
        return pos_wait_expected_utility(s, pool_of(pool, elapsed));
    }, py::arg("scenario"), py::arg("pool"), py::arg("elapsed") = 0.0);
    m.def("delayed_success_prob", [](const Scenario& s, const std::vector<double>& pool, double elapsed, double b,
                                     double delay) { return delayed_success_prob(s, pool_of(pool, elapsed), b, delay); },
          py::arg("scenario"), py::arg("pool"), py::arg("elapsed"), py::arg("fee"), py::arg("delay"));
    m.def("baseline", &baseline_decide, py::arg("scenario"), py::arg("elapsed") = 0.0);
    m.def("expected_round_threshold", &expected_round_threshold, py::arg("scenario"));

    m.def("curve", [](const Scenario& s, const std::string& strategy, const std::vector<double>& grid, int draws,
                      std::uint64_t seed) {
        py::list out;
        for (const auto& p : utility_vs_elapsed_curve(s, Strategy::parse(strategy, s.valuation), grid, {draws, seed})) {
            py::dict row;
            row["elapsed"] = p.elapsed;
            row["utility"] = p.utility;
            row["utility_stderr"] = p.utility_stderr;
            row["fee"] = p.fee;
            row["win_prob"] = p.win_prob;
            out.append(row);
        }
        return out;
    }, py::arg("scenario"), py::arg("strategy"), py::arg("grid"), py::arg("draws") = 200, py::arg("seed") = 1);

    m.def("state_count", &state_count, py::arg("params"));
    m.def("stationary", [](const CtmcParams& p) {
        const auto d = solve_stationary(build_balance_system(p));
        py::dict out;
        std::vector<std::string> labels;
        for (const auto& s : d.states) labels.push_back(s.label());
        out["states"] = labels;
        out["pi"] = d.pi;
        out["residual"] = d.residual;
        out["normalization"] = d.normalization;
        out["utility"] = expected_utility_per_round(p, d);
        return out;
    }, py::arg("params"));
    m.def("sweep", [](const CtmcParams& p, const std::string& var, const std::vector<double>& grid) {
        std::vector<std::pair<double, double>> out;
        for (const auto& r : sweep(p, parse_sweep_var(var), grid)) out.emplace_back(r.value, r.utility);
        return out;
    }, py::arg("params"), py::arg("variable"), py::arg("grid"));

    py::class_<SimulationReport>(m, "SimulationReport")
        .def_readonly("trials", &SimulationReport::trials)
        .def_readonly("mean_utility", &SimulationReport::mean_utility)
        .def_readonly("utility_stderr", &SimulationReport::utility_stderr)
        .def_readonly("inclusion_rate", &SimulationReport::inclusion_rate)
        .def_readonly("mean_fee", &SimulationReport::mean_fee)
        .def_readonly("seed", &SimulationReport::seed)
        .def_readonly("wall_time", &SimulationReport::wall_time);

    m.def("simulate_oblivious", [](const Scenario& s, const std::string& policy, double elapsed, std::int64_t trials,
                                   std::uint64_t seed, std::optional<std::vector<double>> pool) {
        std::optional<MempoolSnapshot> snap;
        if (pool) snap = pool_of(*pool, elapsed);
        py::gil_scoped_release release;
        return simulate_oblivious(s, Strategy::parse(policy, s.valuation), elapsed, trials, seed, snap);
    }, py::arg("scenario"), py::arg("policy"), py::arg("elapsed") = 0.0, py::arg("trials") = 100000,
          py::arg("seed") = 1, py::arg("pool") = py::none());
    m.def("simulate_semi", [](const CtmcParams& p, std::int64_t trials, std::uint64_t seed) {
        py::gil_scoped_release release;
        return simulate_semi_strategic(p, trials, seed);
    }, py::arg("params"), py::arg("trials") = 100000, py::arg("seed") = 1);
}
