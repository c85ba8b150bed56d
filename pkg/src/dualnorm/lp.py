"""Revised dual simplex for  min c^T x  s.t.  b - r <= A x <= b,  lb <= x <= ub.

Rows get slack variables 0 <= s <= r (r = inf unless ranged rows are given),
so the standard form is [A I] (x, s) = b.
With c >= 0 the all-slack basis is dual feasible and no phase one is needed;
nonbasic variables with negative reduced cost are parked at their upper
bound (an artificial one if the bound is infinite, which flags unboundedness
if it is still active at the optimum).

Pricing picks the most violated basic variable (Dantzig); after a stall the
solver switches to smallest-index choices (Bland) for the rest of the run.
The entering variable comes from a two-pass Harris ratio test. The basis
inverse is kept explicitly with product-form updates and periodic
refactorization, which is fine at the problem sizes used here.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration-limit"
UNBOUNDED = "unbounded"


@dataclass
class LpProblem:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    row_range: np.ndarray | None = None  # b - row_range <= A x

    def __post_init__(self):
        self.c = np.asarray(self.c, float)
        self.A = np.atleast_2d(np.asarray(self.A, float))
        self.b = np.asarray(self.b, float)
        m, n = self.A.shape
        if self.c.shape != (n,) or self.b.shape != (m,):
            raise ValueError(f"inconsistent LP shapes: c {self.c.shape}, A {self.A.shape}, b {self.b.shape}")
        self.lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, float)
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, float)
        if np.any(~np.isfinite(self.lb)) or np.any(self.ub < self.lb):
            raise ValueError("lower bounds must be finite and not exceed upper bounds")
        self.row_range = np.full(m, np.inf) if self.row_range is None else np.asarray(self.row_range, float)
        if self.row_range.shape != (m,) or np.any(self.row_range < 0):
            raise ValueError("row ranges must be nonnegative, one per row")

    @property
    def shape(self):
        return self.A.shape


@dataclass
class LpSolution:
    x: np.ndarray
    objective: float
    status: str
    residual: float
    iterations: int
    basis: list = field(default_factory=list)
    upper: list = field(default_factory=list)  # nonbasic variables resting at their upper bound


def feasibility_residual(problem: LpProblem, x) -> float:
    r = problem.A @ x - problem.b
    viol = max(float(np.max(r, initial=0.0)), 0.0)
    viol = max(viol, float(np.max(-r - problem.row_range, initial=0.0)))
    viol = max(viol, float(np.max(problem.lb - x, initial=0.0)))
    viol = max(viol, float(np.max(x - problem.ub, initial=0.0)))
    return viol


def lp_solve(problem: LpProblem, basis=None, upper=None, max_iter: int | None = None, feas_tol: float = 1e-11,
             pivot_tol: float = 1e-9, dual_tol: float = 1e-9, refactor_every: int = 64,
             stall_limit: int = 50, perturb: float = 1e-7) -> LpSolution:
    """Solve the LP; ``basis`` (indices into [x, s]) warm-starts the solver and
    ``upper`` says which nonbasic variables start at their upper bound when
    their reduced cost does not decide it.

    The dual phase runs on slightly perturbed costs (equal costs make the
    dual massively degenerate); a primal phase then restores optimality for
    the true costs from the resulting primal-feasible basis.
    """
    A, c = problem.A, problem.c
    m, n = A.shape
    lb, ub = problem.lb, problem.ub
    b = problem.b - A @ lb
    u = np.concatenate([ub - lb, problem.row_range])
    true_cost = np.concatenate([c, np.zeros(m)])
    cost = true_cost.copy()
    ntot = n + m
    scale = 1.0 + float(np.max(np.abs(b), initial=0.0))
    ptol = feas_tol * scale
    big = 1e7 * scale * (1.0 + float(np.max(np.abs(A), initial=0.0)))

    def column(j):
        if j < n:
            return A[:, j]
        e = np.zeros(m)
        e[j - n] = 1.0
        return e

    if basis is None:
        B = list(range(n, ntot))
    else:
        B = [int(j) for j in basis]
        if len(B) != m or len(set(B)) != m:
            raise ValueError("warm-start basis must list m distinct variables")
    is_basic = np.zeros(ntot, bool)
    is_basic[B] = True
    fixed = u <= 0.0

    def refactor():
        Bmat = np.column_stack([column(j) for j in B])
        return np.linalg.inv(Bmat)

    try:
        Binv = refactor()
    except np.linalg.LinAlgError:
        B = list(range(n, ntot))
        is_basic[:] = False
        is_basic[B] = True
        Binv = np.eye(m)

    def reduced_costs():
        y = Binv.T @ cost[B]
        d = cost - np.concatenate([A.T @ y, y])
        d[is_basic] = 0.0
        return d

    d = reduced_costs()
    at_upper = np.zeros(ntot, bool)
    artificial = np.zeros(ntot, bool)
    hint = np.zeros(ntot, bool)
    if upper is not None and basis is not None:
        hint[np.asarray(upper, dtype=np.int64)] = True
    park = ~is_basic & ((d < -dual_tol) | (hint & (d <= dual_tol) & np.isfinite(u)))
    for j in np.flatnonzero(park):
        at_upper[j] = True
        if not np.isfinite(u[j]):
            artificial[j] = True
            u[j] = big
    if perturb > 0:
        # fixed seed keeps the solver deterministic
        xi = perturb * (1.0 + np.abs(true_cost)) * (1.0 + np.random.default_rng(0).random(ntot))
        nb = ~is_basic & ~fixed
        cost[nb] += np.where(at_upper[nb], -xi[nb], xi[nb])
        d = reduced_costs()

    def nonbasic_values():
        xv = np.zeros(ntot)
        xv[at_upper & ~is_basic] = u[at_upper & ~is_basic]
        return xv

    def basic_values():
        xv = nonbasic_values()
        rhs = b - A @ xv[:n] - xv[n:]
        return Binv @ rhs, xv

    def pivot(r, q, col):
        nonlocal Binv
        piv = col[r]
        Binv[r] /= piv
        mask = np.ones(m, bool)
        mask[r] = False
        Binv[mask] -= np.outer(col[mask], Binv[r])

    xB, _ = basic_values()
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000
    bland = False
    best_obj, since_progress = -np.inf, 0
    status = ITERATION_LIMIT
    it = 0
    retries = 0
    Bidx = np.array(B)
    while it < max_iter:
        lower_v = -xB
        upper_v = xB - u[Bidx]
        viol = np.maximum(lower_v, upper_v)
        infeasible = np.flatnonzero(viol > ptol)
        if infeasible.size == 0:
            # confirm with a fresh factorization before declaring optimality
            Binv = refactor()
            xB, _ = basic_values()
            viol = np.maximum(-xB, xB - u[Bidx])
            if np.all(viol <= ptol):
                status = OPTIMAL
                break
            d = reduced_costs()
            continue
        if bland:
            r = int(infeasible[np.argmin(Bidx[infeasible])])
        else:
            r = int(infeasible[np.argmax(viol[infeasible])])
        below = lower_v[r] > upper_v[r]
        sgn = -1.0 if below else 1.0

        rho = Binv[r]
        alpha = np.concatenate([A.T @ rho, rho])
        sa = sgn * alpha
        cand = ~is_basic & ~fixed & (((~at_upper) & (sa > pivot_tol)) | (at_upper & (sa < -pivot_tol)))
        idx = np.flatnonzero(cand)
        if idx.size == 0:
            status = INFEASIBLE
            break
        dd = np.where(at_upper[idx], -d[idx], d[idx])
        dd = np.maximum(dd, 0.0)
        aa = np.abs(alpha[idx])
        ratios = dd / aa
        if bland:
            tmin = ratios.min()
            ties = idx[ratios <= tmin + 1e-12 * (1 + tmin)]
            q = int(ties.min())
        else:
            theta_max = np.min((dd + dual_tol) / aa)
            ok = ratios <= theta_max
            q = int(idx[ok][np.argmax(aa[ok])])

        col = Binv @ column(q)
        piv = col[r]
        if abs(piv) < 0.5 * pivot_tol or abs(piv - alpha[q]) > 1e-6 * (1 + abs(piv)):
            retries += 1
            if retries > 5:
                break
            # basis inverse drifted; rebuild and retry
            Binv = refactor()
            xB, _ = basic_values()
            d = reduced_costs()
            continue
        retries = 0
        theta_d = d[q] / alpha[q]
        d = d - theta_d * alpha
        leaving = Bidx[r]
        d[q] = 0.0
        d[leaving] = -theta_d

        bound = 0.0 if below else u[leaving]
        theta_p = (xB[r] - bound) / piv
        xq_old = u[q] if at_upper[q] else 0.0
        xB = xB - theta_p * col
        xB[r] = xq_old + theta_p

        is_basic[leaving] = False
        is_basic[q] = True
        at_upper[leaving] = not below
        at_upper[q] = False
        B[r] = q
        Bidx[r] = q
        pivot(r, q, col)

        it += 1
        if it % refactor_every == 0:
            Binv = refactor()
            xB, _ = basic_values()
            d = reduced_costs()

        obj = float(cost[Bidx] @ xB + cost[~is_basic] @ nonbasic_values()[~is_basic])
        if obj > best_obj + 1e-12 * (1 + abs(best_obj)):
            best_obj, since_progress = obj, 0
        else:
            since_progress += 1
            if since_progress >= stall_limit:
                bland = True

    if status == OPTIMAL and perturb > 0:
        cost = true_cost
        d = reduced_costs()
        status, it = _primal_cleanup(A, n, m, u, fixed, is_basic, at_upper, B, Bidx, Binv, xB, d, column,
                                     refactor, basic_values, reduced_costs, pivot, it, max_iter,
                                     ptol, pivot_tol, dual_tol, refactor_every, stall_limit)
        Binv = refactor()
        xB, _ = basic_values()

    xfull = nonbasic_values()
    xfull[Bidx] = xB
    x = lb + xfull[:n]
    if status == OPTIMAL and (np.any(artificial & at_upper & ~is_basic)
                              or np.any(artificial[Bidx] & (xB > 0.5 * big))):
        # an artificial bound is active: unbounded if the true problem is feasible at all
        probe = lp_solve(LpProblem(np.zeros(n), problem.A, problem.b, problem.lb, problem.ub, problem.row_range),
                         max_iter=max_iter, feas_tol=feas_tol, perturb=0.0)
        status = UNBOUNDED if probe.status == OPTIMAL else INFEASIBLE
    # snap tiny bound violations produced by roundoff
    x = np.clip(x, lb, ub)
    return LpSolution(x=x, objective=float(c @ x), status=status, residual=feasibility_residual(problem, x),
                      iterations=it, basis=list(B), upper=np.flatnonzero(at_upper & ~is_basic).tolist())


def _primal_cleanup(A, n, m, u, fixed, is_basic, at_upper, B, Bidx, Binv, xB, d, column, refactor,
                    basic_values, reduced_costs, pivot, it, max_iter, ptol, pivot_tol, dual_tol,
                    refactor_every, stall_limit):
    """Primal simplex from a primal-feasible basis; state arrays are updated in place."""
    bland = False
    stalls = 0
    while it < max_iter:
        elig = ~is_basic & ~fixed & ((~at_upper & (d < -dual_tol)) | (at_upper & (d > dual_tol)))
        idx = np.flatnonzero(elig)
        if idx.size == 0:
            return OPTIMAL, it
        q = int(idx.min()) if bland else int(idx[np.argmax(np.abs(d[idx]))])
        direction = -1.0 if at_upper[q] else 1.0
        col = Binv @ column(q)
        step = direction * col  # xB moves by -t * step
        t_best, r = u[q], -1
        dec = step > pivot_tol
        inc = step < -pivot_tol
        with np.errstate(divide="ignore", invalid="ignore"):
            t_dec = np.where(dec, np.maximum(xB, 0.0) / np.where(dec, step, 1.0), np.inf)
            room = u[Bidx] - xB
            t_inc = np.where(inc & np.isfinite(u[Bidx]), np.maximum(room, 0.0) / np.where(inc, -step, 1.0), np.inf)
        t_all = np.minimum(t_dec, t_inc)
        if t_all.size and np.min(t_all) < t_best:
            tmin = np.min(t_all)
            ties = np.flatnonzero(t_all <= tmin + 1e-12 * (1 + tmin))
            r = int(ties[np.argmin(Bidx[ties])]) if bland else int(ties[np.argmax(np.abs(step[ties]))])
            t_best = t_all[r]
        if not np.isfinite(t_best):
            return UNBOUNDED, it
        if t_best == 0.0:
            stalls += 1
            bland = bland or stalls >= stall_limit
        else:
            stalls = 0
        xB -= t_best * step
        if r < 0:
            at_upper[q] = not at_upper[q]  # bound flip, basis unchanged
        else:
            leaving = Bidx[r]
            to_upper = bool(t_inc[r] <= t_dec[r])
            alpha_row = np.concatenate([A.T @ Binv[r], Binv[r]])
            theta_d = d[q] / col[r]
            d -= theta_d * alpha_row
            d[q] = 0.0
            d[leaving] = -theta_d
            xB[r] = (u[q] if at_upper[q] else 0.0) + direction * t_best
            is_basic[leaving] = False
            is_basic[q] = True
            at_upper[leaving] = to_upper
            at_upper[q] = False
            B[r] = q
            Bidx[r] = q
            pivot(r, q, col)
        it += 1
        if it % refactor_every == 0:
            Binv[:] = refactor()
            xB[:] = basic_values()[0]
            d[:] = reduced_costs()
    return ITERATION_LIMIT, it
