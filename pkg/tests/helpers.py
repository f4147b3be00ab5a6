"""Chain factories shared by the test modules."""
import networkx as nx
import numpy as np

from rlgl.graphs import DirectedCycle, DirectedGraph, generate, random_walk_chain, uniform_chain
from rlgl.markov import TransitionMatrix, mixture_chain


def random_chain(rng, n, density=None, self_loops=True):
    """Random irreducible chain: a weighted Hamiltonian cycle plus random extra edges."""
    A = np.zeros((n, n))
    perm = rng.permutation(n)
    A[perm, np.roll(perm, -1)] = rng.random(n) + 0.1
    p = min(1.0, 3.0 / n) if density is None else density
    mask = rng.random((n, n)) < p
    if not self_loops:
        np.fill_diagonal(mask, False)
    A[mask] += rng.random(mask.sum())
    return TransitionMatrix(A / A.sum(1, keepdims=True))


def undirected_walk(rng, n, p=0.3):
    """Simple random walk on a connected G(n, p) graph (reversible, no self-loops)."""
    while True:
        G = nx.gnp_random_graph(n, p, seed=int(rng.integers(2**31)))
        if nx.is_connected(G):
            break
    e = np.array(G.edges())
    src = np.r_[e[:, 0], e[:, 1]]
    dst = np.r_[e[:, 1], e[:, 0]]
    return random_walk_chain(DirectedGraph(n, src, dst))


def weighted_reversible(rng, n, density=0.5):
    """Reversible chain from a random symmetric weight matrix (self-loops allowed)."""
    W = rng.random((n, n)) * (rng.random((n, n)) < density)
    W = W + W.T
    i = np.arange(n)
    W[i, (i + 1) % n] += 0.1
    W[(i + 1) % n, i] += 0.1
    return TransitionMatrix(W / W.sum(1, keepdims=True))


def cycle_chain(n):
    return random_walk_chain(generate(DirectedCycle(n)))


def cycle_mixture(n, eps):
    """``(1 - eps) U + eps C`` with ``C`` the directed n-cycle."""
    return mixture_chain(uniform_chain(n), cycle_chain(n), eps)


def two_state(a=0.5, b=0.7):
    return TransitionMatrix(np.array([[1 - a, a], [b, 1 - b]]))


def random_start(rng, n):
    x = rng.random(n) + 0.05
    return x / x.sum()
