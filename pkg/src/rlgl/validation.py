"""Input checks shared by the estimator layer and the CLI."""
import numpy as np
import scipy.sparse as sp

from .exceptions import DimensionMismatch, InvalidTransitionMatrix
from .graphs import DirectedGraph
from .markov import TransitionMatrix


def check_transition_matrix(P, atol=1e-12):
    """Return ``P`` as a validated :class:`TransitionMatrix`.

    Accepts a TransitionMatrix, a scipy sparse matrix or anything
    ``np.asarray`` understands.
    """
    if isinstance(P, TransitionMatrix):
        return P
    if not sp.issparse(P):
        P = np.asarray(P, dtype=float)
        if P.ndim != 2:
            raise InvalidTransitionMatrix(f"expected a 2-d matrix, got ndim={P.ndim}")
    return TransitionMatrix(P, atol=atol)


def check_distribution(x, n=None, name="x"):
    """Return ``x`` as a float vector of nonnegative entries with positive mass."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-d, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise DimensionMismatch(f"{name} has length {x.shape[0]}, expected {n}")
    if not np.all(np.isfinite(x)) or np.any(x < 0) or x.sum() <= 0:
        raise ValueError(f"{name} must be finite, nonnegative and not all zero")
    return x


def check_graph(G):
    """Return ``G`` as a :class:`DirectedGraph` (adjacency matrices are accepted)."""
    if isinstance(G, DirectedGraph):
        return G
    A = sp.csr_matrix(G)
    A.eliminate_zeros()
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"adjacency must be square, got {A.shape}")
    return DirectedGraph.from_csr(A)
