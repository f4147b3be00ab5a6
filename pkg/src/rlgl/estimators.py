"""Estimator-style wrappers around the solver and the diagnostics.

These follow the scikit-learn conventions (constructor stores parameters,
``fit`` sets trailing-underscore attributes, ``get_params``/``set_params``
come from ``BaseEstimator``) so they compose with tools that expect them.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .graphs import PAGERANK_DAMPING, largest_scc_nodes, pagerank_chain, random_walk_chain
from .heuristics import HeuristicSpec, parse_heuristic
from .markov import irreversibility_profile, stationary_dense
from .solver import StopRule, run
from .validation import check_distribution, check_graph, check_transition_matrix


class RLGLStationary(BaseEstimator):
    """Stationary distribution of a Markov chain by RLGL iteration.

    Parameters
    ----------
    heuristic : str
        Heuristic name, optionally with parameters (``"theta:r=1.5"``).
    tol : float
        Stop when ``||r||_1 <= tol``.
    max_cost : float
        Budget in normalized cost (one power-iteration sweep = 1).
    max_steps : int, optional
    seed : int, optional
        Seed for the randomized heuristics.
    trace_stride : int
    x0 : array_like, optional
        Starting iterate, uniform by default.

    Attributes
    ----------
    stationary_distribution_ : ndarray
    trace_ : ConvergenceTrace
    converged_ : bool
    n_features_in_ : int
    """

    def __init__(
        self,
        heuristic="gsd-deg",
        tol=1e-8,
        max_cost=200.0,
        max_steps=None,
        seed=None,
        trace_stride=1,
        x0=None,
    ):
        self.heuristic = heuristic
        self.tol = tol
        self.max_cost = max_cost
        self.max_steps = max_steps
        self.seed = seed
        self.trace_stride = trace_stride
        self.x0 = x0

    def _spec(self):
        if isinstance(self.heuristic, HeuristicSpec):
            return self.heuristic if self.seed is None else self.heuristic.with_seed(self.seed)
        return parse_heuristic(self.heuristic, seed=self.seed)

    def fit(self, P, y=None):
        P = check_transition_matrix(P)
        x0 = None if self.x0 is None else check_distribution(self.x0, P.n, "x0")
        stop = StopRule(self.tol, self.max_cost, self.max_steps)
        pi_hat, trace = run(P, self._spec(), x0=x0, stop=stop, trace_stride=self.trace_stride)
        self.stationary_distribution_ = pi_hat
        self.trace_ = trace
        self.converged_ = trace.converged
        self.n_features_in_ = P.n
        return self

    def predict(self, P=None):
        """Return the fitted distribution (``P`` is accepted for API symmetry)."""
        check_is_fitted(self, "stationary_distribution_")
        return self.stationary_distribution_

    def fit_predict(self, P, y=None):
        return self.fit(P).predict()

    def score(self, P, y=None):
        """Negative l1 residual ``-||pi_hat (P - I)||_1`` of the fitted vector on ``P``."""
        check_is_fitted(self, "stationary_distribution_")
        P = check_transition_matrix(P)
        x = self.stationary_distribution_
        return -float(np.abs(P.csr.T @ x - x).sum())


class RLGLPageRank(RLGLStationary):
    """PageRank of a directed graph by RLGL iteration.

    ``fit`` takes a :class:`DirectedGraph` or an adjacency matrix.  With
    ``lscc=True`` the graph is first restricted to its largest strongly
    connected component and ``damping=None`` then gives the plain random
    walk.

    Attributes
    ----------
    nodes_ : ndarray
        Original ids of the nodes the distribution refers to.
    """

    def __init__(
        self,
        damping=PAGERANK_DAMPING,
        lscc=False,
        patch_dangling=False,
        heuristic="gsd-deg",
        tol=1e-8,
        max_cost=200.0,
        max_steps=None,
        seed=None,
        trace_stride=1,
        x0=None,
    ):
        super().__init__(heuristic, tol, max_cost, max_steps, seed, trace_stride, x0)
        self.damping = damping
        self.lscc = lscc
        self.patch_dangling = patch_dangling

    def fit(self, G, y=None):
        G = check_graph(G)
        nodes = np.arange(G.n)
        if self.lscc:
            nodes = largest_scc_nodes(G)
            G = G.subgraph(nodes)
        if self.damping is None:
            P = random_walk_chain(G)
        else:
            if not 0 < self.damping < 1:
                raise ValueError(f"damping must lie in (0, 1), got {self.damping}")
            P = pagerank_chain(G, self.damping, self.patch_dangling)
        super().fit(P)
        self.nodes_ = nodes
        return self


class IrreversibilityDiagnostics(TransformerMixin, BaseEstimator):
    """Dense irreversibility profile of a chain.

    ``transform(X)`` maps iterates (rows of ``X``) to their Dirichlet
    energies under the fitted chain.

    Attributes
    ----------
    profile_ : IrreversibilityProfile
    pi_ : ndarray
    """

    def __init__(self, rtol=1e-5):
        self.rtol = rtol

    def fit(self, P, y=None):
        from .analysis import ChainDiagnostics

        P = check_transition_matrix(P)
        self.profile_ = irreversibility_profile(P, rtol=self.rtol)
        self.pi_ = self.profile_.pi
        self._diag = ChainDiagnostics(P, self.pi_)
        self.n_features_in_ = P.n
        return self

    def transform(self, X):
        check_is_fitted(self, "profile_")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return np.array([self._diag.energy(x) for x in X])

    def fit_transform(self, P, y=None, iterates=None):
        """Fit on ``P`` and return the energies of ``iterates`` (default: ``pi``)."""
        self.fit(P)
        return self.transform(self.pi_ if iterates is None else iterates)


def dense_stationary(P):
    """Convenience wrapper: validated dense stationary distribution."""
    return stationary_dense(check_transition_matrix(P))
