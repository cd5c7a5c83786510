"""Fee and broadcast-time strategies for a strategic mempool user."""

from ._feetiming import (
    ConfigError,
    CtmcParams,
    DomainError,
    InvalidStateError,
    NumericalError,
    ParseError,
    Scenario,
    ScenarioFile,
    SimulationReport,
    StrategyDecision,
    baseline,
    curve,
    delayed_success_prob,
    expected_round_threshold,
    fbr,
    ibr,
    ibr_success_prob,
    load_scenario,
    nbr,
    nbr_success_prob,
    parse_scenario,
    simulate_oblivious,
    simulate_semi,
    state_count,
    stationary,
    sweep,
    wait_utility,
)

__version__ = "0.1.0"
