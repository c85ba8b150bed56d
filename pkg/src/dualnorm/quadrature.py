"""Empirical quadrature as a sparse representation problem.

Rows of G are integrands eta(x; phi_j, mu_l) at the high-fidelity points,
plus a final row of ones; y = G rho_hf. A rule rho is admissible when
||G rho - y||_inf <= delta.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .eim import eim_build_scalar, eim_quadrature_weights
from .lp import OPTIMAL, LpProblem, lp_solve
from .mio import MioSolution, branch_and_bound, support
from .problems import integrand_matrix, make_fields

L1, MIO, EIM = "l1", "mio", "eim"
MEMORY_BUDGET = 2e8  # entries of G


class ProvenanceError(ValueError):
    pass


class MemoryBudgetError(RuntimeError):
    pass


@dataclass
class SparseRepProblem:
    G: np.ndarray  # (K, Nq)
    y: np.ndarray  # (K,)
    delta: float
    nonneg: bool = True
    rows: list = field(default_factory=list)  # (l, j) per row, "identity" last
    columns: np.ndarray | None = None  # global point indices of G's columns

    @property
    def K(self) -> int:
        return self.G.shape[0]

    def global_columns(self) -> np.ndarray:
        return np.arange(self.G.shape[1]) if self.columns is None else self.columns


@dataclass
class EmpiricalQuadratureRule:
    points: np.ndarray  # indices into the high-fidelity points
    weights: np.ndarray
    method: str
    delta: float
    residual: float
    n_hf: int | None = None
    info: dict = field(default_factory=dict)

    @property
    def Q(self) -> int:
        return len(self.weights)

    def dense(self, n: int | None = None) -> np.ndarray:
        rho = np.zeros(n or self.n_hf)
        rho[self.points] = self.weights
        return rho


def integrand_block(space, upsilons, columns=None) -> np.ndarray:
    """Rows eta(x; phi_j, mu_l) for every (l, j), restricted to ``columns``."""
    tables = space.tables if columns is None else space.tables[columns]
    rows = []
    for ups in upsilons:
        u = ups if columns is None else ups[columns]
        rows.append(integrand_matrix(tables, u).T)
    return np.vstack(rows)


def assemble_problem(hf, space, spec, train_params, delta: float, nonneg: bool = True,
                     fields=None, jobs: int = 1, memory_budget: float = MEMORY_BUDGET) -> SparseRepProblem:
    if delta <= 0:
        raise ValueError("delta must be positive")
    train_params = np.atleast_2d(train_params)
    K = len(train_params) * space.J + 1
    if K * hf.n_points > memory_budget:
        raise MemoryBudgetError(f"G would hold {K * hf.n_points:.3g} entries; use divide_and_conquer")
    if fields is None:
        fields = make_fields(hf, train_params, spec, jobs)
    G = np.vstack([integrand_block(space, [f.values for f in fields]), np.ones(hf.n_points)])
    y = G @ hf.weights
    rows = [(l, j) for l in range(len(train_params)) for j in range(space.J)] + ["identity"]
    return SparseRepProblem(G=G, y=y, delta=float(delta), nonneg=nonneg, rows=rows)


def constraint_residual(problem: SparseRepProblem, rule: EmpiricalQuadratureRule) -> float:
    """Max constraint violation, accumulated point by point (no G @ rho)."""
    cols = problem.global_columns()
    where = {int(g): k for k, g in enumerate(cols)}
    acc = -problem.y.copy()
    for p, w in zip(rule.points, rule.weights):
        acc += w * problem.G[:, where[int(p)]]
    return float(np.max(np.abs(acc)))


LP_FEAS_TOL = 1e-11


def effective_delta(problem: SparseRepProblem) -> float:
    """Tolerance handed to the LP, shrunk by the solver's feasibility slack."""
    margin = 2.0 * LP_FEAS_TOL * (1.0 + float(np.max(np.abs(problem.y), initial=0.0)) + problem.delta)
    return problem.delta - margin if problem.delta > 4.0 * margin else 0.5 * problem.delta


def _lp_of(problem: SparseRepProblem, delta=None) -> LpProblem:
    d = effective_delta(problem) if delta is None else delta
    G, y = problem.G, problem.y
    A = G if problem.nonneg else np.hstack([G, -G])
    # one ranged row per constraint: y - d <= A x <= y + d
    return LpProblem(np.ones(A.shape[1]), A, y + d, row_range=np.full(len(y), 2.0 * d))


def _rule_from_rho(problem, rho, method, n_hf, **info) -> EmpiricalQuadratureRule:
    supp = support(rho)
    cols = problem.global_columns()
    rule = EmpiricalQuadratureRule(points=cols[supp], weights=rho[supp].copy(), method=method,
                                   delta=problem.delta, residual=0.0, n_hf=n_hf, info=info)
    rule.residual = float(np.max(np.abs(problem.G[:, supp] @ rho[supp] - problem.y)))
    return rule


def _split(x, n):
    rho1, rho2 = x[:n], x[n:]
    # complementarity holds at the optimum; enforce it exactly after thresholding
    s1, s2 = support(x)[support(x) < n], support(x)[support(x) >= n] - n
    r1 = np.zeros(n)
    r2 = np.zeros(n)
    r1[s1] = rho1[s1]
    r2[s2] = rho2[s2]
    both = np.intersect1d(s1, s2)
    net = r1[both] - r2[both]
    r1[both] = np.maximum(net, 0.0)
    r2[both] = np.maximum(-net, 0.0)
    return r1, r2


def l1_eq(problem: SparseRepProblem, n_hf: int | None = None) -> EmpiricalQuadratureRule:
    """l1 relaxation; the free-weight case solves the split (rho1, rho2) LP."""
    n = problem.G.shape[1]
    lp = _lp_of(problem)
    sol = lp_solve(lp, feas_tol=LP_FEAS_TOL)
    if sol.status != OPTIMAL:
        raise RuntimeError(f"l1-EQ linear program ended with status {sol.status}")
    if problem.nonneg:
        rho = sol.x
        info = {}
    else:
        r1, r2 = _split(sol.x, n)
        rho = r1 - r2
        info = {"rho_plus": r1, "rho_minus": r2}
    return _rule_from_rho(problem, rho, L1, n_hf or n, lp_iterations=sol.iterations,
                          lp_objective=sol.objective, **info)


def mio_eq(problem: SparseRepProblem, warm_start: EmpiricalQuadratureRule | None = None,
           time_budget: float = 60.0, node_limit: int | None = None, n_hf: int | None = None):
    """Cardinality minimization by branch and bound; returns (rule, MioSolution)."""
    n = problem.G.shape[1]
    lp = _lp_of(problem)
    cols = problem.global_columns()
    where = {int(g): k for k, g in enumerate(cols)}
    if problem.nonneg:
        U = float(problem.y[-1])  # |Omega| from the identity row
    else:
        U = 2.0 * float(problem.y[-1])
    ws = None
    if warm_start is not None:
        ws = np.zeros(lp.A.shape[1])
        for p, w in zip(warm_start.points, warm_start.weights):
            k = where[int(p)]
            if problem.nonneg:
                ws[k] = w
            elif w > 0:
                ws[k] = w
            else:
                ws[n + k] = -w
        ws = np.minimum(ws, U)
    sol = branch_and_bound(lp.A, lp.b, U, row_range=lp.row_range, warm_start=ws, time_budget=time_budget, node_limit=node_limit)
    x = sol.rho
    if problem.nonneg:
        rho = x
    else:
        r1, r2 = _split(x, n)
        rho = r1 - r2
    rule = _rule_from_rho(problem, rho, MIO, n_hf or n, status=sol.status, gap=sol.gap, nodes=sol.nodes)
    if warm_start is not None and rule.Q > warm_start.Q:
        raise AssertionError("MIO result is less sparse than its warm start")
    return rule, sol


def eim_eq(hf, integrand_snapshots, Q: int) -> EmpiricalQuadratureRule:
    """Quadrature induced by EIM on L^2-POD modes of the integrands.

    Weights can be negative; no tolerance is enforced by construction.
    """
    S = np.asarray(integrand_snapshots, float)
    Q = min(Q, S.shape[1])
    model = eim_build_scalar(S, Q, weights=hf.weights)
    w = eim_quadrature_weights(model, hf.weights)
    rule = EmpiricalQuadratureRule(points=model.points.copy(), weights=w, method=EIM, delta=float("nan"),
                                   residual=float("nan"), n_hf=hf.n_points, info={"M": model.M})
    return rule


def training_residual(rule, snapshots, hf_weights) -> float:
    """max_k |Q_eq(f_k) - Q_hf(f_k)| over columns of ``snapshots`` (Nq, n)."""
    S = np.asarray(snapshots, float)
    return float(np.max(np.abs(rule.weights @ S[rule.points] - hf_weights @ S)))


def partition_points(hf, n_part: int) -> list:
    """Contiguous element blocks of near-equal size -> quadrature point indices."""
    if n_part < 1:
        raise ValueError("n_part must be >= 1")
    blocks = np.array_split(np.arange(hf.mesh.n_elements), n_part)
    return [np.flatnonzero(np.isin(hf.point_element, blk)) for blk in blocks if len(blk)]


@dataclass
class DivideConquerResult:
    rule: EmpiricalQuadratureRule
    local_rules: list
    concatenated: np.ndarray  # rho* built from the local solutions (length Nq)
    candidates: np.ndarray
    problem: SparseRepProblem  # conquer problem on the candidate columns
    mio: MioSolution | None = None


def divide_and_conquer(hf, space, spec, train_params, delta: float, n_part: int, backend: str = L1,
                       nonneg: bool = True, fields=None, jobs: int = 1, mio_time_budget: float = 60.0,
                       mio_node_limit: int | None = None) -> DivideConquerResult:
    """Local l1 problems at tolerance delta / n_part, then a global problem
    restricted to the union of local supports at tolerance delta."""
    train_params = np.atleast_2d(train_params)
    if fields is None:
        fields = make_fields(hf, train_params, spec, jobs)
    ups = [f.values for f in fields]
    rows = [(l, j) for l in range(len(train_params)) for j in range(space.J)] + ["identity"]
    parts = partition_points(hf, n_part)

    def local(idx):
        G = np.vstack([integrand_block(space, ups, idx), np.ones(len(idx))])
        y = G @ hf.weights[idx]
        prob = SparseRepProblem(G=G, y=y, delta=delta / n_part, nonneg=nonneg, rows=rows, columns=idx)
        return prob, l1_eq(prob, n_hf=hf.n_points)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(local, parts))
    else:
        results = [local(idx) for idx in parts]
    local_rules = [r for _, r in results]
    concat = np.zeros(hf.n_points)
    for r in local_rules:
        concat[r.points] = r.weights
    cand = np.sort(np.concatenate([r.points for r in local_rules]))

    G = np.vstack([integrand_block(space, ups, cand), np.ones(len(cand))])
    # global targets are the sum of the local ones
    y = np.zeros(G.shape[0])
    for prob, _ in results:
        y += prob.y
    conquer = SparseRepProblem(G=G, y=y, delta=float(delta), nonneg=nonneg, rows=rows, columns=cand)

    if len(parts) == 1:
        # the local optimum is feasible for, and optimal in, the restricted problem
        rule = _rule_from_rho(conquer, concat[cand], L1, hf.n_points, **{
            k: v for k, v in local_rules[0].info.items()})
    else:
        rule = l1_eq(conquer, n_hf=hf.n_points)
    mio_sol = None
    if backend == MIO:
        rule, mio_sol = mio_eq(conquer, warm_start=rule, time_budget=mio_time_budget,
                               node_limit=mio_node_limit, n_hf=hf.n_points)
    elif backend != L1:
        raise ValueError(f"unknown backend {backend!r}")
    rule.info["n_part"] = n_part
    return DivideConquerResult(rule=rule, local_rules=local_rules, concatenated=concat, candidates=cand,
                               problem=conquer, mio=mio_sol)


def save_rule(rule: EmpiricalQuadratureRule, path) -> None:
    lines = [f"method {rule.method}", f"delta {rule.delta:.17g}", f"Q_eq {rule.Q}",
             f"residual {rule.residual:.17g}", f"n_hf {rule.n_hf}"]
    lines += [f"{int(p)} {w:.17g}" for p, w in zip(rule.points, rule.weights)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_rule(path) -> EmpiricalQuadratureRule:
    lines = Path(path).read_text().splitlines()
    head = dict(ln.split(" ", 1) for ln in lines[:5])
    body = [ln.split() for ln in lines[5:] if ln.strip()]
    pts = np.array([int(a) for a, _ in body], dtype=np.int64)
    w = np.array([float(b) for _, b in body])
    n_hf = None if head["n_hf"] == "None" else int(head["n_hf"])
    return EmpiricalQuadratureRule(points=pts, weights=w, method=head["method"], delta=float(head["delta"]),
                                   residual=float(head["residual"]), n_hf=n_hf)


def timed(fn, *args, **kwargs):
    t = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t
