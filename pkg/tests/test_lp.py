import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from dualnorm.lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LpProblem, feasibility_residual, lp_solve


def vertex_enumeration(c, A, b, ub):
    """Minimum over all basic feasible points of {A x <= b, 0 <= x <= ub}."""
    m, n = A.shape
    rows = [(A[i], b[i]) for i in range(m)]
    rows += [(-np.eye(n)[j], 0.0) for j in range(n)]
    rows += [(np.eye(n)[j], ub[j]) for j in range(n)]
    best = np.inf
    for active in itertools.combinations(range(len(rows)), n):
        M = np.array([rows[k][0] for k in active])
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, np.array([rows[k][1] for k in active]))
        if np.all(A @ x <= b + 1e-9) and np.all(x >= -1e-9) and np.all(x <= ub + 1e-9):
            best = min(best, c @ x)
    return best


def random_problem(rng, m, n, bounded=True):
    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m) + 1.0
    c = rng.standard_normal(n)
    ub = rng.random(n) * 3 + 0.5 if bounded else np.full(n, np.inf)
    return c, A, b, ub


def test_matches_vertex_enumeration(rng):
    for _ in range(40):
        m, n = rng.integers(2, 5), rng.integers(2, 5)
        c, A, b, ub = random_problem(rng, m, n)
        ref = vertex_enumeration(c, A, b, ub)
        sol = lp_solve(LpProblem(c, A, b, ub=ub))
        if np.isfinite(ref):
            assert sol.status == OPTIMAL
            assert sol.objective == pytest.approx(ref, abs=1e-8)
            assert sol.residual <= 1e-9
        else:
            assert sol.status == INFEASIBLE


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 12), n=st.integers(1, 20),
       bounded=st.booleans(), ranged=st.booleans())
def test_matches_highs(seed, m, n, bounded, ranged):
    rng = np.random.default_rng(seed)
    c, A, b, ub = random_problem(rng, m, n, bounded)
    c = np.abs(c) if not bounded else c
    r = rng.random(m) * 2 if ranged else None
    prob = LpProblem(c, A, b, ub=ub, row_range=r)
    sol = lp_solve(prob)
    A_ub, b_ub = (np.vstack([A, -A]), np.concatenate([b, -(b - r)])) if ranged else (A, b)
    bounds = [(0, None if not np.isfinite(u) else u) for u in ub]
    ref = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if ref.status == 0:
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(ref.fun, abs=1e-7 * (1 + abs(ref.fun)))
        assert feasibility_residual(prob, sol.x) <= 1e-8
    else:
        assert sol.status in (INFEASIBLE, UNBOUNDED)


def test_warm_start_from_optimal_basis_needs_no_pivots(rng):
    c, A, b, ub = random_problem(rng, 6, 10)
    prob = LpProblem(np.abs(c), A, b, ub=ub)
    first = lp_solve(prob)
    again = lp_solve(prob, basis=first.basis, upper=first.upper)
    assert again.status == OPTIMAL and again.iterations == 0
    assert again.objective == pytest.approx(first.objective, abs=1e-12)


def test_warm_start_after_bound_change(rng):
    c, A, b, ub = random_problem(rng, 8, 14)
    prob = LpProblem(np.abs(c) + 0.1, A, b, ub=ub)
    first = lp_solve(prob)
    j = int(np.argmax(first.x))
    ub2 = ub.copy()
    ub2[j] = 0.0
    prob2 = LpProblem(prob.c, A, b, ub=ub2)
    warm = lp_solve(prob2, basis=first.basis, upper=first.upper)
    cold = lp_solve(prob2)
    assert warm.status == cold.status
    if cold.status == OPTIMAL:
        assert warm.objective == pytest.approx(cold.objective, abs=1e-9)


def test_detects_infeasible_and_unbounded():
    A = np.array([[1.0, 1.0], [-1.0, -1.0]])
    assert lp_solve(LpProblem([1.0, 1.0], A, [1.0, -2.0])).status == INFEASIBLE
    assert lp_solve(LpProblem([-1.0, 0.0], np.array([[0.0, 1.0]]), [1.0])).status == UNBOUNDED


def test_ranged_rows_enforce_both_sides():
    # 1 <= x1 + x2 <= 2, minimize x1 + 2 x2
    sol = lp_solve(LpProblem([1.0, 2.0], np.array([[1.0, 1.0]]), [2.0], row_range=[1.0]))
    assert sol.status == OPTIMAL
    np.testing.assert_allclose(sol.x, [1.0, 0.0], atol=1e-12)


def test_degenerate_equal_costs_converge(rng):
    # many identical costs make the dual highly degenerate
    G = rng.random((30, 120))
    w = rng.random(120)
    y = G @ w
    prob = LpProblem(np.ones(120), G, y + 1e-3, row_range=np.full(30, 2e-3))
    sol = lp_solve(prob)
    ref = linprog(np.ones(120), A_ub=np.vstack([G, -G]), b_ub=np.concatenate([y + 1e-3, -y + 1e-3]),
                  method="highs")
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(ref.fun, rel=1e-9)
    assert np.count_nonzero(sol.x > 1e-12 * sol.x.max()) <= 30


def test_shape_validation():
    with pytest.raises(ValueError):
        LpProblem([1.0], np.ones((2, 2)), [1.0, 1.0])
    with pytest.raises(ValueError):
        LpProblem([1.0], np.ones((1, 1)), [1.0], row_range=[-1.0])
