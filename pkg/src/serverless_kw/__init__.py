"""Reserve tuning for scale-per-request serverless platforms.

The package models the platform as a controlled Markov chain, evaluates the
long-run cost of a reserve ``theta`` exactly from the stationary distribution,
and searches for the best reserve with a non-stationary Kiefer-Wolfowitz
scheme driven by simulation.
"""
from .config import ConfigError, ExperimentConfig, dump_config, load_config, parse_config
from .cost import REFERENCE_WEIGHTS, CostWeights, cost_vector, instant_cost, sample_cost
from .model import (
    EMPTY_STATE,
    ModelParams,
    StateSpace,
    SystemState,
    build_generator,
    dtmc_row,
    enumerate_states,
    out_transitions,
    uniformization_rate,
)
from .optimizer import (
    Schedules,
    Trajectory,
    kw_step,
    oscillation_flag,
    run_fast_update,
    run_kw,
    write_replication_csv,
    write_trajectory_csv,
)
from .policy import (
    PolicySpec,
    SmoothingSpec,
    binomial_rule,
    penalty,
    pi_distribution,
    simplified_rule,
    smooth_param,
    smooth_step,
)
from .simulator import (
    EpisodeRecord,
    RngStream,
    Segment,
    batch_means,
    run_episode,
    simulate_segment,
    write_trace,
)
from .stationary import (
    CostOracle,
    SolverError,
    StationarySolution,
    UnimodalityError,
    expected_cost,
    fd_derivative,
    locate_minimum,
    reachable_states,
    solve_stationary,
    sweep,
    write_sweep_csv,
)
from .validation import Check, run_validation

__version__ = "0.1.0"
