"""Convergence-rate predictors and empirical checks for RLGL.

Rates are exponential rates of the Dirichlet energy per coordinate update
unless stated otherwise; ``fit_rate`` measures the l1 residual against
normalized cost.
"""
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    InsufficientData,
    InvalidRegime,
    NonPositiveResidual,
    ZeroDerivative,
    ZeroResidual,
)
from .markov import (
    as_transition_matrix,
    decompose,
    laplacians,
    local_irreversibility,
    nearly_reversible_threshold,
    poincare_constant,
    stationary_dense,
)


def reversible_rate(beta, mu, l_max=1.0, rho=1.0):
    """Guaranteed rate ``-rho log(1 - beta mu / l_max)`` on reversible chains.

    A factor of exactly zero (one-step convergence) gives ``inf``.
    """
    q = beta * mu / l_max
    if q > 1.0:
        raise InvalidRegime(f"beta * mu / L = {q:.4g} exceeds 1")
    if rho == 0:
        return 0.0
    if q == 1.0:
        return float("inf")
    return float(-rho * np.log1p(-q))


@dataclass(frozen=True)
class RatePrediction:
    beta: float
    mu: float
    kappa_max: float
    l_max: float
    per_step_factor: float
    rate: float
    applicable: bool


def perturbed_rate(beta, mu, kappa, l=1.0):
    """Per-step factor ``1 - beta mu / L + L kappa^2 / mu`` of perturbed coordinate descent.

    ``applicable`` records the convergence condition
    ``kappa < mu sqrt(beta) / L``; outside it the factor is still returned
    and the rate is ``-log(factor)``, which is then non-positive.
    """
    factor = 1.0 - beta * mu / l + l * kappa**2 / mu
    applicable = kappa < mu * np.sqrt(beta) / l
    rate = float("inf") if factor <= 0 else float(-np.log(factor))
    return RatePrediction(beta, mu, kappa, l, float(factor), rate, bool(applicable))


@dataclass(frozen=True)
class BetaTransfer:
    beta_norm: float
    gamma_star: float
    beta_sym_lower: float
    applicable: bool
    variant: str


def beta_transfer(beta_norm, eta, n, variant="inf"):
    """Lower bound on the goodness of a coordinate w.r.t. the energy gradient.

    Parameters
    ----------
    beta_norm : float
        Goodness measured on the observed residual.
    eta : float
        ``eta_inf`` for ``variant="inf"``, ``eta_2`` for ``variant="l2"``.
    n : int
        Number of states (used by the ``inf`` variant only).
    """
    if variant == "inf":
        g = np.sqrt(n) * eta
    elif variant == "l2":
        g = eta
    else:
        raise ValueError(f"unknown variant {variant!r}")
    gamma = g / (1.0 - g) if g < 1.0 else float("inf")
    root = np.sqrt(beta_norm)
    applicable = bool(gamma <= root)
    lower = ((root - gamma) / (1.0 + gamma)) ** 2 if applicable else 0.0
    return BetaTransfer(beta_norm, float(gamma), float(lower), applicable, variant)


def nearly_reversible_certificate(profile):
    """Check the nearly-reversible condition and, if it holds, the implied rate.

    Returns
    -------
    ok : bool
    explanation : dict
        ``margin`` (threshold minus ``eta_inf``) and, when ``ok``, the
        transferred ``beta`` for Gauss-Southwell (``beta_norm = 1/n``) and
        the guaranteed per-update energy rate.
    """
    n = profile.n
    threshold = nearly_reversible_threshold(n)
    ok = bool(profile.nearly_reversible)
    info = {
        "n": n,
        "eta_inf": profile.eta_inf,
        "threshold": threshold,
        "margin": threshold - profile.eta_inf,
        "nearly_reversible": ok,
    }
    if ok:
        bt = beta_transfer(1.0 / n, profile.eta_inf, n, "inf")
        pred = perturbed_rate(bt.beta_sym_lower, profile.mu, profile.kappa_max, 1.0)
        info.update(
            beta_tilde=bt.beta_sym_lower,
            gamma_star=bt.gamma_star,
            per_step_factor=pred.per_step_factor,
            rate=pred.rate,
        )
    return ok, info


def cycle_mixture_eta(n, eps):
    """``eta_inf`` of ``(1 - eps) U + eps C`` with ``C`` the directed n-cycle."""
    return (eps / np.sqrt(2.0)) / (1.0 - eps * np.cos(2.0 * np.pi / n))


def cycle_mixture_threshold(n, form="exact"):
    """Mixing weight at which the cycle/uniform mixture stops being nearly reversible.

    ``form="exact"`` solves ``eta_inf(eps) = 1 / (2n + sqrt(n))``, giving
    ``1 / (sqrt(2) n + sqrt(n / 2) + cos(2 pi / n))``.  ``form="printed"``
    returns ``1 / ((sqrt(2) n + sqrt(n / 2)) (1 + cos(2 pi / n)))``, which
    agrees with the exact crossing only when ``cos(2 pi / n) = 0``.
    """
    if n < 3:
        raise ValueError("the directed cycle needs n >= 3")
    c = np.cos(2.0 * np.pi / n)
    base = np.sqrt(2.0) * n + np.sqrt(n / 2.0)
    if form == "exact":
        return float(1.0 / (base + c))
    if form == "printed":
        return float(1.0 / (base * (1.0 + c)))
    raise ValueError(f"unknown form {form!r}")


def cd_boundary(lambda2, n):
    """Smallest ``beta`` at which n coordinate updates beat one power iteration."""
    lambda2 = np.asarray(lambda2, dtype=float)
    return (1.0 - lambda2 ** (2.0 / n)) / (1.0 - lambda2)


@dataclass(frozen=True)
class RateRegionGrid:
    n: int
    lambda2: np.ndarray
    beta: np.ndarray
    diff: np.ndarray  # shape (len(beta), len(lambda2)); nan where invalid
    boundary: np.ndarray

    @property
    def valid(self):
        return np.isfinite(self.diff)


def cd_pi_rates(n, lambda2, beta):
    """``(r_CD, r_PI)`` in energy units per unit of arithmetic cost."""
    if np.any(beta * (1.0 - lambda2) >= 1.0):
        raise InvalidRegime("beta * (1 - lambda2) must be < 1")
    r_cd = -n * np.log1p(-beta * (1.0 - lambda2))
    r_pi = -2.0 * np.log(lambda2)
    return r_cd, r_pi


def cd_pi_region(n, lambda2_grid, beta_grid):
    """Difference ``r_CD - r_PI`` over a ``(beta, lambda2)`` grid.

    Cells with ``beta (1 - lambda2) >= 1`` are left as ``nan``.
    """
    lam = np.asarray(lambda2_grid, dtype=float)
    beta = np.asarray(beta_grid, dtype=float)
    if np.any((lam <= 0) | (lam >= 1)):
        raise InvalidRegime("lambda2 must lie in (0, 1)")
    if np.any((beta <= 0) | (beta > 1)):
        raise InvalidRegime("beta must lie in (0, 1]")
    B, L = np.meshgrid(beta, lam, indexing="ij")
    ok = B * (1.0 - L) < 1.0
    diff = np.full(B.shape, np.nan)
    r_cd, r_pi = cd_pi_rates(n, L[ok], B[ok])
    diff[ok] = r_cd - r_pi
    return RateRegionGrid(n, lam, beta, diff, cd_boundary(lam, n))


def perturbed_optimal_step(partial, xi, l):
    """Optimal step ``1/L + xi / partial`` for a perturbed coordinate update."""
    if partial == 0:
        raise ZeroDerivative("partial derivative is zero")
    return 1.0 / l + xi / partial


def fit_rate(trace, window=0.5):
    """Least-squares decay rate of ``log ||r||_1`` per unit normalized cost.

    Parameters
    ----------
    trace : ConvergenceTrace
    window : float or int
        Trailing fraction of the trace (float in (0, 1]) or number of points.
    """
    cost = np.asarray(trace.cost, dtype=float)
    l1 = np.asarray(trace.l1, dtype=float)
    k = int(np.ceil(window * len(cost))) if isinstance(window, float) else int(window)
    k = min(k, len(cost))
    if k < 3:
        raise InsufficientData(f"need at least 3 points, have {k}")
    cost, l1 = cost[-k:], l1[-k:]
    if np.any(l1 <= 0):
        raise NonPositiveResidual("residual must be positive inside the fit window")
    if np.ptp(cost) == 0:
        raise InsufficientData("all points in the window share one cost value")
    slope = np.polyfit(cost, np.log(l1), 1)[0]
    return float(-slope)


class ChainDiagnostics:
    """Dense view of a chain in symmetrized coordinates ``y = x Pi^-1/2``.

    Precomputes ``pi``, both Laplacians, the antisymmetric part, the
    Poincare constant and ``kappa``; all methods take iterates ``x`` in the
    original coordinates.
    """

    def __init__(self, P, pi=None):
        self.P = as_transition_matrix(P)
        self.pi = stationary_dense(self.P) if pi is None else np.asarray(pi, dtype=float)
        self.sqrt_pi = np.sqrt(self.pi)
        self.L_norm, self.L_sym = laplacians(self.P, self.pi)
        self.S, self.A = decompose(self.P, self.pi)
        self.mu = poincare_constant(self.L_sym)
        self.kappa = local_irreversibility(self.P, self.pi)
        self.lipschitz = np.diag(self.L_sym).copy()

    def y(self, x):
        return np.asarray(x, dtype=float) / self.sqrt_pi

    def energy(self, x):
        y = self.y(x)
        return 0.5 * float(y @ self.L_sym @ y)

    def gradient(self, x):
        """``s = y L_sym``, the energy gradient."""
        return self.y(x) @ self.L_sym

    def observed(self, x):
        """``y L_norm``; equals ``-r Pi^-1/2`` for the raw residual ``r``."""
        return self.y(x) @ self.L_norm

    def perturbation(self, x):
        """``xi = y A``, so that ``observed = gradient - xi``."""
        return self.y(x) @ self.A


def empirical_beta(x, coord, diag, mode="sym"):
    """Share of the squared residual norm carried by ``coord``.

    ``mode="sym"`` uses the energy gradient ``y L_sym``; ``mode="norm"`` the
    observed residual ``y L_norm``.  ``x`` may also be a solver state.
    """
    x = getattr(x, "x", x)
    if mode == "sym":
        v = diag.gradient(x)
    elif mode == "norm":
        v = diag.observed(x)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    total = float(v @ v)
    if total == 0:
        raise ZeroResidual("residual vanishes")
    return float(v[coord] ** 2 / total)
