"""Block-selection rules for the RLGL iteration.

Each rule maps the current solver state to the set of nodes whose cash is
pushed at this step.  All argmax/argmin ties go to the smallest node id.
"""
from dataclasses import dataclass, replace

import numpy as np

HEURISTIC_NAMES = (
    "rr",
    "rand",
    "greedy",
    "maxc",
    "pc",
    "theta",
    "gs",
    "pi",
    "gsd",
    "gsd-deg",
    "local-gsd",
    "local-gsd-deg",
)
RANDOMIZED = frozenset({"rand", "pc"})
GSD_FAMILY = frozenset({"gsd", "gsd-deg", "local-gsd", "local-gsd-deg"})
RESCALE_MODES = ("none", "sqrt", "linear", "sqrt_deg")

GREEDY_MAX_N = 10_000
GREEDY_TIE_RTOL = 1e-12

_EMPTY = np.empty(0, dtype=np.int64)


@dataclass(frozen=True)
class HeuristicSpec:
    """Selection rule and its parameters.

    Parameters
    ----------
    name : str
        One of :data:`HEURISTIC_NAMES`.
    seed : int, optional
        Seed for the randomized rules (``rand``, ``pc``).
    r : float
        Exponent of the Theta threshold, ``r >= 1``.
    proxy_floor : float, optional
        Lower clamp applied to the iterate when it is used as a proxy for
        the stationary law (GSD family).  Defaults to ``1e-12 / n``.
    """

    name: str
    seed: int = None
    r: float = 2.0
    proxy_floor: float = None

    def __post_init__(self):
        if self.name not in HEURISTIC_NAMES:
            raise ValueError(f"unknown heuristic {self.name!r}; expected one of {HEURISTIC_NAMES}")
        if self.r < 1:
            raise ValueError(f"Theta exponent must be >= 1, got {self.r}")
        if self.proxy_floor is not None and self.proxy_floor <= 0:
            raise ValueError("proxy_floor must be positive")

    @property
    def label(self):
        return f"theta-r{self.r:g}" if self.name == "theta" else self.name

    def with_seed(self, seed):
        return replace(self, seed=seed)

    def floor(self, n):
        return self.proxy_floor if self.proxy_floor is not None else 1e-12 / n


def parse_heuristic(text, seed=None):
    """Parse ``"name"`` or ``"name:key=value,..."`` (e.g. ``"theta:r=1.5"``)."""
    name, _, rest = text.partition(":")
    kwargs = {}
    for item in filter(None, rest.split(",")):
        key, _, value = item.partition("=")
        key = key.strip()
        if key == "r" or key == "proxy_floor":
            kwargs[key] = float(value)
        elif key == "seed":
            kwargs[key] = int(value)
        else:
            raise ValueError(f"unknown heuristic parameter {key!r}")
    kwargs.setdefault("seed", seed)
    return HeuristicSpec(name.strip(), **kwargs)


def rescaled_residual(r, pi_like, mode="sqrt", out_degree=None, floor=0.0):
    """Residual magnitudes rescaled by a proxy of the stationary law.

    ``none`` gives ``|r|``, ``sqrt`` gives ``|r| / sqrt(p)``, ``linear``
    gives ``|r| / p`` and ``sqrt_deg`` gives ``|r| / sqrt(d p)`` with ``d``
    the out-degree.  The proxy is clamped below by ``floor``.
    """
    a = np.abs(np.asarray(r, dtype=float))
    if mode == "none":
        return a
    p = np.asarray(pi_like, dtype=float)
    if floor > 0:
        p = np.maximum(p, floor)
    if mode == "sqrt":
        return a / np.sqrt(p)
    if mode == "linear":
        return a / p
    if mode == "sqrt_deg":
        if out_degree is None:
            raise ValueError("sqrt_deg rescaling needs out-degrees")
        return a / np.sqrt(out_degree * p)
    raise ValueError(f"unknown rescaling mode {mode!r}")


def theta_threshold(r_snapshot, exponent):
    """Power mean ``((1/n) sum |r_j|^exponent)^(1/exponent)``."""
    a = np.abs(np.asarray(r_snapshot, dtype=float))
    return float(np.mean(a**exponent) ** (1.0 / exponent))


def greedy_l1_deltas(r, P):
    """Change in ``||r||_1`` from pushing each single node's cash.

    ``out[i] = ||r + r_i e_i (P - I)||_1 - ||r||_1``; computed in one pass
    over the nonzeros of ``P``.
    """
    rows, cols, p = P.edge_rows, P.indices, P.data
    push = r[rows] * p
    terms = np.where(
        cols == rows,
        np.abs(push),
        np.abs(r[cols] + push) - np.abs(r[cols]),
    )
    return np.bincount(rows, weights=terms, minlength=P.n) - np.abs(r)


def local_maxima(score, P):
    """Nodes whose score is maximal in their closed undirected neighbourhood.

    A node with an equal-scoring neighbour of smaller id is not selected,
    so the result is an independent set of the transition graph (self-loops
    aside).  Zero scores are never selected.
    """
    rows, cols = P.neighbor_rows, P.neighbor_cols
    s_i, s_j = score[rows], score[cols]
    beats = (s_j > s_i) | ((s_j == s_i) & (cols < rows))
    beaten = np.bincount(rows, weights=beats, minlength=P.n) > 0
    return np.flatnonzero((score > 0) & ~beaten)


def gsd_scores(state, h, P, proxy=None):
    p = state.x if proxy is None else proxy
    mode = "sqrt_deg" if h.name.endswith("-deg") else "sqrt"
    return rescaled_residual(state.r, p, mode, P.out_degree, h.floor(P.n))


def select_block(state, h, P, proxy=None):
    """Nodes to update at the current step.

    Parameters
    ----------
    state : SolverState
        Supplies ``r``, ``x``, ``step``, ``rng`` and the Theta snapshot.
    h : HeuristicSpec
    P : TransitionMatrix
    proxy : array_like, optional
        Stationary-law proxy for the GSD family; the current iterate when
        omitted.

    Returns
    -------
    ndarray of int
        Sorted node ids; empty when the residual vanishes.
    """
    r = state.r
    a = np.abs(r)
    if not a.any():
        return _EMPTY
    n = P.n
    name = h.name
    if name == "pi":
        return np.arange(n)
    if name in ("gs", "maxc"):
        return np.array([np.argmax(a)])
    if name == "rr":
        return np.array([state.step % n])
    if name == "rand":
        return np.array([state.rng.integers(n)])
    if name == "pc":
        c = np.cumsum(a)
        i = int(np.searchsorted(c, state.rng.random() * c[-1], side="right"))
        return np.array([min(i, n - 1)])
    if name == "theta":
        sweep = state.step // n
        if state.theta_sweep != sweep:
            state.theta = theta_threshold(r, h.r)
            state.theta_sweep = sweep
        i = state.step % n
        if a[i] > 0 and a[i] >= state.theta:
            return np.array([i])
        return _EMPTY
    if name == "greedy":
        if n > GREEDY_MAX_N:
            raise ValueError(f"greedy selection is limited to n <= {GREEDY_MAX_N}")
        delta = greedy_l1_deltas(r, P)
        delta[a == 0] = np.inf
        # near-ties (e.g. no cancellation anywhere) go to the largest cash,
        # otherwise the rule can cycle cash around without progress
        ties = delta <= delta.min() + GREEDY_TIE_RTOL * a.sum()
        return np.array([np.argmax(np.where(ties, a, -1.0))])
    score = gsd_scores(state, h, P, proxy)
    if name.startswith("local-"):
        return local_maxima(score, P)
    return np.array([np.argmax(score)])
