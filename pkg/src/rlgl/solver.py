"""The RLGL iteration: state, update kernel, stopping and trace recording.

The iterate ``x`` accumulates every transaction and the residual
``r = x (P - I)`` is the cash still to be distributed.  A step on a block
``B`` adds ``r`` restricted to ``B`` to ``x`` and propagates that cash
through the rows of ``P`` indexed by ``B``, so only the out-edges of ``B``
are touched.  Cost is counted in edges used divided by the edge count of
the chain; a full power-iteration sweep costs exactly 1.
"""
import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import BudgetExhausted, DimensionMismatch, SingularBlock
from .heuristics import HeuristicSpec, select_block
from .markov import DENSE_LIMIT, as_transition_matrix, laplacians, stationary_dense


@dataclass
class SolverState:
    """Mutable iteration state, owned by a single run.

    ``theta`` and ``theta_sweep`` hold the Theta rule's per-sweep snapshot.
    """

    x: np.ndarray
    r: np.ndarray
    step: int = 0
    cost: float = 0.0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    theta: float = 0.0
    theta_sweep: int = -1

    @property
    def l1(self):
        return float(np.abs(self.r).sum())

    @property
    def l2(self):
        return float(np.sqrt(self.r @ self.r))

    def pi_hat(self):
        return self.x / np.abs(self.x).sum()

    def copy(self):
        rng = np.random.default_rng()
        rng.bit_generator.state = self.rng.bit_generator.state
        return SolverState(
            self.x.copy(), self.r.copy(), self.step, self.cost, rng, self.theta, self.theta_sweep
        )


def init(P, x0=None, seed=None):
    """Start from ``x0`` (uniform by default) with ``r0 = x0 (P - I)``."""
    P = as_transition_matrix(P)
    if x0 is None:
        x0 = np.full(P.n, 1.0 / P.n)
    x = np.array(x0, dtype=float)
    if x.shape != (P.n,):
        raise DimensionMismatch(f"x0 has shape {x.shape}, expected ({P.n},)")
    r = P.csr.T @ x - x
    return SolverState(x=x, r=r, rng=np.random.default_rng(seed))


def step(state, block, P):
    """Apply one RLGL transaction on ``block`` in place and return ``state``.

    ``x += r * 1_B`` and ``r += (r * 1_B)(P - I)``.  The full block is
    evaluated as ``r <- r P``.
    """
    block = np.asarray(block, dtype=np.int64)
    k = block.size
    r = state.r
    if k == 0:
        pass
    elif k == P.n:
        state.x += r
        state.r = P.csr.T @ r
        state.cost += 1.0
    elif k == 1:
        i = int(block[0])
        v = r[i]
        state.x[i] += v
        r[i] = 0.0
        s, e = P.indptr[i], P.indptr[i + 1]
        r[P.indices[s:e]] += v * P.data[s:e]
        state.cost += float(e - s) / P.nnz
    else:
        vals = r[block]
        state.x[block] += vals
        r[block] = 0.0
        r += P.csr[block].T @ vals
        state.cost += float(P.out_degree[block].sum()) / P.nnz
    state.step += 1
    return state


def annihilating_block_step(state, block, P):
    """Block step whose size zeroes the residual on ``block``.

    Solves ``u (I - P)_BB = r_B`` and applies ``x += u``,
    ``r += u (P - I)``.  On a singleton without self-loop, or an independent
    set, this coincides with :func:`step`.

    Raises
    ------
    SingularBlock
        If ``(I - P)_BB`` is numerically singular.
    """
    block = np.unique(np.asarray(block, dtype=np.int64))
    if block.size == 0:
        state.step += 1
        return state
    rows = P.csr[block]
    M = np.eye(block.size) - rows[:, block].toarray()
    try:
        u = scipy.linalg.solve(M.T, state.r[block])
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
        raise SingularBlock(str(exc)) from exc
    if not np.all(np.isfinite(u)) or np.linalg.cond(M) > 1e14:
        raise SingularBlock(f"(I - P)_BB is singular on block of size {block.size}")
    state.x[block] += u
    state.r[block] -= u
    state.r += rows.T @ u
    state.cost += float(P.out_degree[block].sum()) / P.nnz
    state.step += 1
    return state


@dataclass(frozen=True)
class StopRule:
    """Stop when ``||r||_1 <= tol`` or a budget runs out (cost or steps)."""

    tol: float = 1e-8
    max_cost: float = 200.0
    max_steps: int = None

    def __post_init__(self):
        bounded = [
            self.tol is not None and self.tol > 0,
            self.max_cost is not None and np.isfinite(self.max_cost),
            self.max_steps is not None,
        ]
        if not any(bounded):
            raise ValueError("stop rule needs a positive tol or a finite budget")


@dataclass
class ConvergenceTrace:
    """Residual history sampled every ``stride`` steps and at termination."""

    stride: int = 1
    steps: list = field(default_factory=list)
    cost: list = field(default_factory=list)
    l1: list = field(default_factory=list)
    l2: list = field(default_factory=list)
    energy: list = None
    block_size: list = field(default_factory=list)
    converged: bool = False
    stop_reason: str = ""
    wall_time: float = 0.0

    def record(self, state, block_size, energy=None):
        self.steps.append(int(state.step))
        self.cost.append(float(state.cost))
        self.l1.append(state.l1)
        self.l2.append(state.l2)
        self.block_size.append(int(block_size))
        if self.energy is not None:
            self.energy.append(float(energy))

    def __len__(self):
        return len(self.steps)

    @property
    def has_energy(self):
        return self.energy is not None

    def to_csv(self, fh=None):
        """Write ``step,cost,l1,l2[,energy]`` rows; return the text if ``fh`` is None."""
        out = io.StringIO() if fh is None else fh
        w = csv.writer(out, lineterminator="\n")
        header = ["step", "cost", "l1", "l2"] + (["energy"] if self.has_energy else [])
        w.writerow(header)
        for k in range(len(self.steps)):
            row = [self.steps[k], repr(self.cost[k]), repr(self.l1[k]), repr(self.l2[k])]
            if self.has_energy:
                row.append(repr(self.energy[k]))
            w.writerow(row)
        return out.getvalue() if fh is None else None

    @classmethod
    def from_csv(cls, fh):
        rows = list(csv.DictReader(fh))
        tr = cls(energy=[] if rows and "energy" in rows[0] else None)
        for row in rows:
            tr.steps.append(int(row["step"]))
            tr.cost.append(float(row["cost"]))
            tr.l1.append(float(row["l1"]))
            tr.l2.append(float(row["l2"]))
            tr.block_size.append(0)
            if tr.energy is not None:
                tr.energy.append(float(row["energy"]))
        return tr


class _EnergyMeter:
    def __init__(self, P, pi):
        pi = stationary_dense(P) if pi is None else np.asarray(pi, dtype=float)
        self.scale = 1.0 / np.sqrt(pi)
        self.L = laplacians(P, pi)[1]

    def __call__(self, x):
        y = x * self.scale
        return 0.5 * float(y @ self.L @ y)


def run(
    P,
    h,
    x0=None,
    stop=StopRule(),
    trace_stride=1,
    energy=False,
    pi=None,
    on_budget="return",
    callback=None,
    proxy=None,
):
    """Iterate selection and update until the residual is small or the budget ends.

    Parameters
    ----------
    P : TransitionMatrix
    h : HeuristicSpec or str
    x0 : array_like, optional
        Starting iterate, uniform by default.
    stop : StopRule
    trace_stride : int
        Record every ``trace_stride`` steps (and always the first and last).
    energy : bool
        Also trace the Dirichlet energy of ``x Pi^-1/2``; dense, so only
        allowed for ``n <= 5000``.
    pi : array_like, optional
        Stationary law for energy tracing; computed densely when omitted.
    on_budget : {"return", "raise"}
        With ``"raise"``, a run that stops on its budget raises
        :class:`BudgetExhausted` carrying the partial result.
    callback : callable, optional
        ``callback(state, block)`` after every step.
    proxy : array_like, optional
        Fixed stationary-law proxy for the GSD family instead of the iterate.

    Returns
    -------
    pi_hat : ndarray
        ``x / ||x||_1``.
    trace : ConvergenceTrace
    """
    P = as_transition_matrix(P)
    if isinstance(h, str):
        h = HeuristicSpec(h)
    if on_budget not in ("return", "raise"):
        raise ValueError("on_budget must be 'return' or 'raise'")
    meter = None
    if energy:
        if P.n > DENSE_LIMIT:
            raise ValueError(f"energy tracing is dense and limited to n <= {DENSE_LIMIT}")
        meter = _EnergyMeter(P, pi)
    state = init(P, x0, seed=h.seed)
    trace = ConvergenceTrace(stride=max(1, int(trace_stride)), energy=[] if meter else None)
    tol = stop.tol if stop.tol is not None else 0.0
    max_cost = stop.max_cost if stop.max_cost is not None else np.inf
    max_steps = stop.max_steps if stop.max_steps is not None else np.inf

    t0 = time.perf_counter()
    trace.record(state, 0, meter(state.x) if meter else None)
    block = ()
    while True:
        l1 = state.l1
        if l1 <= tol:
            trace.converged, trace.stop_reason = True, "tol"
            break
        if state.cost >= max_cost:
            trace.stop_reason = "max_cost"
            break
        if state.step >= max_steps:
            trace.stop_reason = "max_steps"
            break
        block = select_block(state, h, P, proxy)
        step(state, block, P)
        if callback is not None:
            callback(state, block)
        if state.step % trace.stride == 0:
            trace.record(state, len(block), meter(state.x) if meter else None)
    if trace.steps[-1] != state.step:
        trace.record(state, len(block), meter(state.x) if meter else None)
    trace.wall_time = time.perf_counter() - t0
    pi_hat = state.pi_hat()
    if not trace.converged and on_budget == "raise":
        raise BudgetExhausted(pi_hat, trace)
    return pi_hat, trace
