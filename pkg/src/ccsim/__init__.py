"""ccsim: colonization-and-collapse population dynamics on graphs.

Exact series kernel, graph topologies, event-driven simulators for the
blocking and non-blocking spatial processes, Galton-Watson extinction
analytics, non-spatial catastrophe models, and phase-diagram sweeps.
"""

from .kernel import (
    ModelParams,
    SeriesControl,
    OffspringDistribution,
    yule_size_pmf,
    attempt_gf,
    mu,
    mu_hypergeometric,
    alpha,
    offspring_pmf,
    q_lower_bound,
    offspring_pgf,
    solve_lambda_for_mu,
)
from .graphs import Lattice, Tree, FiniteGraph, parse_edge_list
from .simulator import (
    Status,
    SimConfig,
    SimResult,
    SurvivalEstimate,
    run_cc,
    run_xi,
    run_replicas,
    edge_speed_experiment,
    sample_collapse_size,
    sample_hit_pattern,
)
from .branching import GWModel, gw_extinction_prob, gw_simulate, expected_reachers, theorem1_verdict
from .nonspatial import CatastropheParams, critical_p, survival_condition, simulate_single, simulate_multi
from .sweep import SweepSpec, survival_curve, estimate_lambda_c, theorem_thresholds

__version__ = "0.1.0"
