import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import cycle_chain, random_chain, random_start, undirected_walk, weighted_reversible
from rlgl.analysis import ChainDiagnostics
from rlgl.exceptions import BudgetExhausted, DimensionMismatch, SingularBlock
from rlgl.heuristics import HEURISTIC_NAMES, HeuristicSpec, select_block
from rlgl.markov import TransitionMatrix, stationary_dense
from rlgl.solver import (
    ConvergenceTrace,
    StopRule,
    annihilating_block_step,
    init,
    run,
    step,
)

SWAP = TransitionMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_init_examples():
    rng = np.random.default_rng(0)
    P = random_chain(rng, 6)
    pi = stationary_dense(P)
    assert np.abs(init(P, pi).r).max() < 1e-15
    s = init(SWAP, [1.0, 0.0])
    np.testing.assert_array_equal(s.r, [-1.0, 1.0])
    assert (s.step, s.cost) == (0, 0.0)
    assert abs(init(P).r.sum()) < 1e-15
    with pytest.raises(DimensionMismatch):
        init(P, np.ones(3))


def test_step_swap_chain_example():
    s = init(SWAP, [1.0, 0.0])
    step(s, [1], SWAP)
    np.testing.assert_array_equal(s.x, [1.0, 1.0])
    np.testing.assert_array_equal(s.r, [0.0, 0.0])
    np.testing.assert_array_equal(s.pi_hat(), [0.5, 0.5])
    assert s.cost == 0.5 and s.step == 1


def test_step_empty_block_only_advances_counter():
    P = random_chain(np.random.default_rng(1), 5)
    s = init(P, random_start(np.random.default_rng(2), 5))
    x, r = s.x.copy(), s.r.copy()
    step(s, [], P)
    np.testing.assert_array_equal(s.x, x)
    np.testing.assert_array_equal(s.r, r)
    assert s.step == 1 and s.cost == 0


def test_full_block_is_power_iteration():
    rng = np.random.default_rng(3)
    P = random_chain(rng, 9)
    s = init(P, random_start(rng, 9))
    for _ in range(5):
        r = s.r.copy()
        step(s, np.arange(9), P)
        np.testing.assert_array_equal(s.r, P.csr.T @ r)
    assert s.cost == 5.0


def test_block_step_matches_dense_formula():
    rng = np.random.default_rng(4)
    P = random_chain(rng, 10)
    M = P.toarray()
    s = init(P, random_start(rng, 10))
    B = np.array([1, 4, 7])
    ind = np.zeros(10)
    ind[B] = 1
    x_new = s.x + s.r * ind
    r_new = s.r + (s.r * ind) @ (M - np.eye(10))
    cost = P.out_degree[B].sum() / P.nnz
    step(s, B, P)
    np.testing.assert_allclose(s.x, x_new, atol=1e-15)
    np.testing.assert_allclose(s.r, r_new, atol=1e-15)
    assert s.cost == pytest.approx(cost)


# -- annihilating block step --------------------------------------------------


def test_annihilating_singleton_without_self_loop_equals_step():
    rng = np.random.default_rng(5)
    P = undirected_walk(rng, 10)
    s1 = init(P, random_start(rng, 10))
    s2 = s1.copy()
    step(s1, [3], P)
    annihilating_block_step(s2, [3], P)
    np.testing.assert_allclose(s1.x, s2.x, atol=1e-15)
    np.testing.assert_allclose(s1.r, s2.r, atol=1e-15)


def test_annihilating_singleton_with_half_self_loop_doubles_update():
    P = TransitionMatrix(np.array([[0.5, 0.5, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]))
    s = init(P, [0.6, 0.2, 0.2])
    r0 = s.r[0]
    x0 = s.x[0]
    annihilating_block_step(s, [0], P)
    assert s.x[0] - x0 == pytest.approx(2 * r0)
    assert abs(s.r[0]) < 1e-15


def test_annihilating_independent_set_equals_step():
    rng = np.random.default_rng(6)
    P = undirected_walk(rng, 15, p=0.2)
    s = init(P, random_start(rng, 15))
    B = select_block(s, HeuristicSpec("local-gsd"), P)
    a, b = s.copy(), s.copy()
    step(a, B, P)
    annihilating_block_step(b, B, P)
    np.testing.assert_allclose(a.x, b.x, atol=1e-14)
    np.testing.assert_allclose(a.r, b.r, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 20))
def test_annihilating_any_block_zeroes_residual(seed, n):
    rng = np.random.default_rng(seed)
    P = random_chain(rng, n)
    s = init(P, random_start(rng, n))
    B = rng.choice(n, size=int(rng.integers(1, n)), replace=False)
    total = s.r.sum()
    annihilating_block_step(s, B, P)
    assert np.abs(s.r[B]).max() <= 1e-10
    assert abs(s.r.sum() - total) <= 1e-12


def test_annihilating_singular_block():
    P = TransitionMatrix(np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.0, 0.5]]))
    s = init(P, [0.3, 0.3, 0.4])
    with pytest.raises(SingularBlock):
        annihilating_block_step(s, [0, 1], P)


# -- invariants -------------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 25), name=st.sampled_from(HEURISTIC_NAMES))
def test_conservation_monotonicity_consistency(seed, n, name):
    rng = np.random.default_rng(seed)
    P = random_chain(rng, n)
    s = init(P, random_start(rng, n), seed=seed)
    r0 = np.abs(s.r).sum()
    h = HeuristicSpec(name, seed=seed)
    M = P.toarray()
    for t in range(300):
        before = s.l1
        step(s, select_block(s, h, P), P)
        assert abs(s.r.sum()) <= 1e-9 * max(1.0, r0)
        assert s.l1 <= before + 1e-12
        if t % 50 == 0:
            exact = s.x @ M - s.x
            assert np.abs(exact - s.r).sum() <= 1e-8 * s.l1 + 1e-12 * np.abs(s.x).sum()


def test_power_iteration_residual_recursion():
    rng = np.random.default_rng(7)
    P = random_chain(rng, 12)
    rs = []
    run(P, "pi", x0=random_start(rng, 12), stop=StopRule(tol=0, max_steps=6),
        callback=lambda s, b: rs.append(s.r.copy()))
    for a, b in zip(rs, rs[1:]):
        np.testing.assert_array_equal(b, P.csr.T @ a)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 20))
def test_reversible_energy_decrease_identity(seed, n):
    rng = np.random.default_rng(seed)
    P = undirected_walk(rng, n)
    d = ChainDiagnostics(P)
    s = init(P, random_start(rng, n))
    for _ in range(30):
        if s.l1 < 1e-14:
            break
        i = int(rng.integers(n))
        E0 = d.energy(s.x)
        r_tilde = -d.gradient(s.x)
        step(s, [i], P)
        assert E0 - d.energy(s.x) == pytest.approx(0.5 * r_tilde[i] ** 2, abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 20))
def test_general_energy_decrease_identity(seed, n):
    rng = np.random.default_rng(seed)
    P = random_chain(rng, n, self_loops=False)
    d = ChainDiagnostics(P)
    s = init(P, random_start(rng, n))
    for _ in range(30):
        i = int(rng.integers(n))
        E0 = d.energy(s.x)
        g, xi = d.gradient(s.x), d.perturbation(s.x)
        step(s, [i], P)
        assert E0 - d.energy(s.x) == pytest.approx(0.5 * g[i] ** 2 - 0.5 * xi[i] ** 2, abs=1e-10)


def test_observed_residual_is_gradient_minus_perturbation():
    rng = np.random.default_rng(8)
    P = random_chain(rng, 10)
    d = ChainDiagnostics(P)
    s = init(P, random_start(rng, 10))
    np.testing.assert_allclose(d.observed(s.x), -s.r / d.sqrt_pi, atol=1e-13)
    np.testing.assert_allclose(d.observed(s.x), d.gradient(s.x) - d.perturbation(s.x), atol=1e-13)


def test_contraction_on_small_reversible_chains():
    rng = np.random.default_rng(9)
    for _ in range(10):
        P = undirected_walk(rng, 10, p=0.4)
        d = ChainDiagnostics(P)
        s = init(P, random_start(rng, 10))
        for _ in range(100):
            E0 = d.energy(s.x)
            if E0 < 1e-20:
                break
            i = select_block(s, HeuristicSpec("gs"), P)[0]
            step(s, [i], P)
            assert d.energy(s.x) <= (1 - d.mu / (10 * d.lipschitz[i])) * E0 + 1e-12


# -- run --------------------------------------------------------------------


def test_run_swap_chain_gauss_southwell():
    pi_hat, tr = run(SWAP, "gs")
    np.testing.assert_allclose(pi_hat, [0.5, 0.5])
    assert tr.converged and tr.steps[-1] <= 2
    pi_hat, tr = run(SWAP, "gs", x0=[0.7, 0.3])
    np.testing.assert_allclose(pi_hat, [0.5, 0.5])
    assert tr.converged and tr.steps[-1] <= 2


def test_run_power_iteration_reversible():
    rng = np.random.default_rng(10)
    P = weighted_reversible(rng, 20)
    pi_hat, tr = run(P, "pi", stop=StopRule(tol=1e-8))
    assert tr.converged
    assert np.abs(pi_hat - stationary_dense(P)).sum() <= 1e-6


def test_run_cycle_round_robin_budget():
    # against the sweep order, each sweep merges only one pair of cash packets
    P = TransitionMatrix(cycle_chain(5).toarray().T)
    with pytest.raises(BudgetExhausted) as info:
        run(P, "rr", x0=[0.5, 0.1, 0.1, 0.2, 0.1], stop=StopRule(max_steps=7), on_budget="raise")
    exc = info.value
    assert exc.trace.stop_reason == "max_steps"
    assert exc.trace.l1[-1] > 0
    assert exc.pi_hat.shape == (5,)


def test_run_respects_cost_budget_within_one_block():
    rng = np.random.default_rng(11)
    P = random_chain(rng, 30)
    _, tr = run(P, "rand", x0=random_start(rng, 30), stop=StopRule(tol=1e-300, max_cost=2.0))
    assert tr.stop_reason == "max_cost"
    assert tr.cost[-1] < 2.0 + P.out_degree.max() / P.nnz


def test_trace_stride_and_monotone_fields():
    rng = np.random.default_rng(12)
    P = random_chain(rng, 15)
    _, tr = run(P, "gsd", x0=random_start(rng, 15), trace_stride=7)
    assert tr.steps[0] == 0
    assert all(s % 7 == 0 for s in tr.steps[1:-1])
    assert np.all(np.diff(tr.steps) > 0)
    assert np.all(np.diff(tr.cost) >= 0)


def test_trace_csv_roundtrip_and_header():
    rng = np.random.default_rng(13)
    P = random_chain(rng, 8)
    _, tr = run(P, "gs", x0=random_start(rng, 8), energy=True)
    text = tr.to_csv()
    assert text.splitlines()[0] == "step,cost,l1,l2,energy"
    back = ConvergenceTrace.from_csv(io.StringIO(text))
    assert back.steps == tr.steps and back.cost == tr.cost and back.l1 == tr.l1
    assert back.energy == tr.energy
    _, tr2 = run(P, "gs")
    assert tr2.to_csv().splitlines()[0] == "step,cost,l1,l2"


def test_stop_rule_needs_a_bound():
    with pytest.raises(ValueError):
        StopRule(tol=0, max_cost=None, max_steps=None)
    with pytest.raises(ValueError):
        StopRule(tol=None, max_cost=np.inf)


@pytest.mark.parametrize("name", HEURISTIC_NAMES)
def test_every_heuristic_converges_on_a_small_chain(name):
    rng = np.random.default_rng(14)
    P = random_chain(rng, 12)
    pi_hat, tr = run(P, HeuristicSpec(name, seed=1), x0=random_start(rng, 12), stop=StopRule(1e-10, 1e4))
    assert tr.converged
    assert np.abs(pi_hat - stationary_dense(P)).sum() <= 1e-8
