"""LP-based branch and bound for cardinality-minimal sparse representations.

Solves  min 1^T z  s.t.  b - r <= A rho <= b,  0 <= rho <= U z,  z binary.
Nodes fix z_j = 0 (rho_j pinned at zero) or z_j = 1 (rho_j free of cost).
The relaxation of a node is  |F1| + sum_{j free} rho_j / U  and is solved by
the dual simplex warm-started from the parent basis.
"""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass

import numpy as np

from .lp import OPTIMAL, LpProblem, lp_solve

PROVEN = "proven-optimal"
TIMEOUT = "incumbent-at-timeout"


@dataclass
class MioSolution:
    z: np.ndarray
    rho: np.ndarray
    cardinality: int
    status: str
    gap: float
    nodes: int


def support(x, rel_tol: float = 1e-12) -> np.ndarray:
    x = np.asarray(x, float)
    top = np.max(np.abs(x), initial=0.0)
    if top == 0.0:
        return np.zeros(0, dtype=np.int64)
    return np.flatnonzero(np.abs(x) > rel_tol * top)


def branch_and_bound(A, b, U: float, row_range=None, warm_start=None, time_budget: float = 60.0,
                     node_limit: int | None = None, feas_tol: float = 1e-9) -> MioSolution:
    """``warm_start`` is a feasible rho; the result never has larger support."""
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    m, n = A.shape
    r = np.full(m, np.inf) if row_range is None else np.asarray(row_range, float)
    t0 = time.monotonic()
    slack = feas_tol * (1.0 + np.max(np.abs(b), initial=0.0))

    def feasible(rho):
        Ar = A @ rho
        return np.all(Ar <= b + slack) and np.all(Ar >= b - r - slack) and np.all(rho >= -slack) and np.all(rho <= U + slack)

    best_rho, best_card = None, n + 1
    if warm_start is not None:
        ws = np.asarray(warm_start, float)
        if not feasible(ws):
            raise ValueError("warm start is not feasible")
        best_rho, best_card = ws, len(support(ws))

    counter = itertools.count()
    heap = []

    def solve_node(fix0, fix1, parent):
        c = np.full(n, 1.0 / U)
        ub = np.full(n, U)
        if fix0:
            ub[list(fix0)] = 0.0
        if fix1:
            c[list(fix1)] = 0.0
        basis, upper = (parent.basis, parent.upper) if parent is not None else (None, None)
        sol = lp_solve(LpProblem(c, A, b, ub=ub, row_range=r), basis=basis, upper=upper)
        if sol.status != OPTIMAL:
            return None
        return sol, len(fix1) + sol.objective

    nodes = 0
    root = solve_node(frozenset(), frozenset(), None)
    if root is None and best_rho is None:
        raise RuntimeError("relaxation infeasible and no incumbent available")
    if root is not None:
        heapq.heappush(heap, (root[1], next(counter), frozenset(), frozenset(), root[0]))
    timed_out = False
    while heap:
        if time.monotonic() - t0 > time_budget or (node_limit is not None and nodes >= node_limit):
            timed_out = True
            break
        lb, _, fix0, fix1, sol = heapq.heappop(heap)
        nodes += 1
        if np.ceil(lb - 1e-9) >= best_card:
            continue
        rho = np.where(np.abs(sol.x) > 0, sol.x, 0.0)
        supp = support(rho)
        if len(supp) < best_card and feasible(rho):
            best_rho, best_card = rho.copy(), len(supp)
            if np.ceil(lb - 1e-9) >= best_card:
                continue
        z = rho / U
        free = np.array([j for j in supp if j not in fix1], dtype=np.int64)
        frac = z[free] if free.size else np.zeros(0)
        frac = frac[(frac > 1e-9) & (frac < 1 - 1e-9)]
        if frac.size == 0:
            continue  # integral relaxation: its support was already offered as incumbent
        cand = free[(z[free] > 1e-9) & (z[free] < 1 - 1e-9)]
        j = int(cand[np.argmin(np.abs(z[cand] - 0.5))])
        for child0, child1 in ((fix0 | {j}, fix1), (fix0, fix1 | {j})):
            res = solve_node(child0, child1, sol)
            if res is None:
                continue
            csol, clb = res
            if np.ceil(clb - 1e-9) < best_card:
                heapq.heappush(heap, (clb, next(counter), child0, child1, csol))
    if best_rho is None:
        raise RuntimeError("branch and bound found no feasible point within the budget")
    gap = 0.0
    if timed_out and heap:
        gap = float(best_card - min(h[0] for h in heap))
    z = np.zeros(n)
    z[support(best_rho)] = 1.0
    return MioSolution(z=z, rho=best_rho, cardinality=best_card, status=TIMEOUT if timed_out else PROVEN,
                       gap=max(gap, 0.0), nodes=nodes)
