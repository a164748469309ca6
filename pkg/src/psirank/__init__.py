"""Influence ranking for online social platforms.

Solves the steady-state balance equations of post propagation over a follower
graph to score and rank users by influence, validates the solution with an
event-driven platform simulator, and measures empirical influence directly from
post/re-post traces.
"""

__version__ = "0.1.0"

from .emulator import ReplayResult, TraceEvent, replay, resolve_origin
from .graph import (
    SocialGraph,
    build_graph,
    generate_binary_tree,
    generate_erdos_renyi,
    generate_scale_free,
    load_edge_list,
    save_edge_list,
)
from .ingest import ParsedTrace, RateEstimate, estimate_rates, infer_star_graph, parse_trace
from .metrics import ScoreTable, common_users_proportion, pearson, psi_scores, rank, rank_scatter
from .model import (
    ActivityRates,
    InfluenceVectors,
    NonConvergenceError,
    PropagationSystem,
    SingularSystemError,
    birth_death_check,
    build_system,
    iter_label_solutions,
    load_rates,
    pagerank,
    save_rates,
    solve_all_labels,
    solve_dense,
    solve_iterative,
    spectral_bounds,
)
from .simulator import (
    PlatformState,
    PolicyConfig,
    Post,
    SimulationResult,
    check_conservation,
    conservation_violations,
    simulate,
)

__all__ = [
    "__version__",
    "ActivityRates",
    "InfluenceVectors",
    "NonConvergenceError",
    "ParsedTrace",
    "PlatformState",
    "PolicyConfig",
    "Post",
    "PropagationSystem",
    "RateEstimate",
    "ReplayResult",
    "ScoreTable",
    "SimulationResult",
    "SingularSystemError",
    "SocialGraph",
    "TraceEvent",
    "birth_death_check",
    "build_graph",
    "build_system",
    "check_conservation",
    "common_users_proportion",
    "conservation_violations",
    "estimate_rates",
    "generate_binary_tree",
    "generate_erdos_renyi",
    "generate_scale_free",
    "infer_star_graph",
    "iter_label_solutions",
    "load_edge_list",
    "load_rates",
    "pagerank",
    "parse_trace",
    "pearson",
    "psi_scores",
    "rank",
    "rank_scatter",
    "replay",
    "resolve_origin",
    "save_edge_list",
    "save_rates",
    "simulate",
    "solve_all_labels",
    "solve_dense",
    "solve_iterative",
    "spectral_bounds",
]
