"""RLGL: asynchronous push-style solvers for Markov-chain stationary distributions.

Modules
-------
markov
    Transition matrices, stationary laws, Laplacians, irreversibility.
graphs
    Directed graphs, generators, edge-list I/O, random-walk and PageRank chains.
heuristics, solver
    Block-selection rules and the RLGL iteration.
analysis
    Rate predictors and empirical checks.
estimators
    scikit-learn style wrappers.
cli, svg
    Benchmark front end.
"""
from .analysis import (
    ChainDiagnostics,
    beta_transfer,
    cd_pi_region,
    cycle_mixture_threshold,
    empirical_beta,
    fit_rate,
    nearly_reversible_certificate,
    perturbed_rate,
    reversible_rate,
)
from .estimators import IrreversibilityDiagnostics, RLGLPageRank, RLGLStationary
from .exceptions import RLGLError
from .graphs import (
    SBM,
    DirectedCycle,
    DirectedGraph,
    PreferentialAttachment,
    UniformComplete,
    generate,
    largest_scc,
    load_edge_list,
    pagerank_chain,
    random_walk_chain,
    write_edge_list,
)
from .heuristics import HEURISTIC_NAMES, HeuristicSpec, parse_heuristic
from .markov import (
    TransitionMatrix,
    irreversibility_profile,
    laplacians,
    stationary_dense,
)
from .solver import ConvergenceTrace, StopRule, run

__version__ = "0.1.0"
