"""Dual-norm estimators behind one interface, error reports and bounds.

Every estimator maps Upsilon_mu (values at the high-fidelity points) to a
nonnegative scalar; ``evaluate`` compares it with the exact dual norm.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ati import AtiModel, ati_es_estimate, ati_estimate
from .fem import dual_norm_exact, riesz_solve
from .problems import assemble_functional_vector, integrand_matrix, make_fields
from .quadrature import EmpiricalQuadratureRule, ProvenanceError
from .testspace import EmpiricalTestSpace, projection_error

INDETERMINATE_TOL = 1e-8


def _upsilon(ups) -> np.ndarray:
    u = np.asarray(ups.values if hasattr(ups, "values") else ups, float)
    return u[:, None] if u.ndim == 1 else u


def check_provenance(space: EmpiricalTestSpace, rule: EmpiricalQuadratureRule) -> None:
    nq = space.tables.shape[0]
    if rule.n_hf is not None and rule.n_hf != nq:
        raise ProvenanceError(f"rule built on {rule.n_hf} points, test space tabulated on {nq}")
    mesh = rule.info.get("mesh")
    if mesh is not None and space.provenance.get("mesh") not in (None, mesh):
        raise ProvenanceError("rule and test space come from different meshes")
    if len(rule.points) and (rule.points.min() < 0 or rule.points.max() >= nq):
        raise ProvenanceError("rule points fall outside the tabulated quadrature points")


def es_estimate(space: EmpiricalTestSpace, hf_weights, upsilon) -> float:
    """L_Jes: Euclidean norm of the high-fidelity integrals of eta(.; phi_j)."""
    if space.J == 0:
        return 0.0
    eta = integrand_matrix(space.tables, _upsilon(upsilon))
    return float(np.linalg.norm(hf_weights @ eta))


def eq_es_estimate(space: EmpiricalTestSpace, rule: EmpiricalQuadratureRule, upsilon) -> float:
    """||H^T rho_eq|| with H_{q,j} = eta(x_q; phi_j) on the rule points only."""
    check_provenance(space, rule)
    pts = rule.points
    H = integrand_matrix(space.tables[pts], _upsilon(upsilon)[pts])
    return float(np.linalg.norm(H.T @ rule.weights))


def online_cost(method: str, M: int = 0, Jes: int = 0, Q: int = 0, D: int = 1) -> int:
    """Stored floats needed online for each estimator family."""
    if method == "ATI":
        return M * M
    if method == "ATI+ES":
        return M * min(M, Jes)
    if method.endswith("EQ+ES"):
        return D * Jes * Q
    raise ValueError(f"unknown method {method!r}")


@dataclass
class Estimator:
    method: str
    fn: Callable[[np.ndarray], float]
    C_on: int
    meta: dict = field(default_factory=dict)

    def __call__(self, upsilon) -> float:
        return self.fn(_upsilon(upsilon))


def ati_estimator(model: AtiModel) -> Estimator:
    return Estimator("ATI", lambda u: ati_estimate(model, u), online_cost("ATI", M=model.M),
                     {"M": model.M})


def ati_es_estimator(model: AtiModel, space: EmpiricalTestSpace) -> Estimator:
    J = min(model.M, space.J)
    sub = space.truncate(J)
    H = model.h_matrix(sub)
    return Estimator("ATI+ES", lambda u: ati_es_estimate(model, sub, u, H=H),
                     online_cost("ATI+ES", M=model.M, Jes=space.J), {"M": model.M, "Jes": J})


def eq_es_estimator(space: EmpiricalTestSpace, rule: EmpiricalQuadratureRule, label: str) -> Estimator:
    check_provenance(space, rule)
    D = space.tables.shape[1]
    return Estimator(label, lambda u: eq_es_estimate(space, rule, u),
                     online_cost("EQ+ES", Jes=space.J, Q=rule.Q, D=D),
                     {"Jes": space.J, "delta": rule.delta, "Q_eq": rule.Q})


@dataclass
class EstimatorReport:
    method: str
    exact: np.ndarray
    estimates: np.ndarray
    C_on: int
    meta: dict = field(default_factory=dict)

    @property
    def errors(self) -> np.ndarray:
        return np.abs(self.exact - self.estimates)

    @property
    def E_inf(self) -> float:
        return float(np.max(self.errors))

    @property
    def E_mean(self) -> float:
        return float(np.mean(self.errors))

    def records(self) -> list:
        return [(float(a), float(b), float(e)) for a, b, e in zip(self.exact, self.estimates, self.errors)]


def exact_dual_norms(hf, spec, fields) -> np.ndarray:
    Ls = np.column_stack([assemble_functional_vector(hf, f, spec) for f in fields])
    xi = riesz_solve(hf, Ls)
    return np.sqrt(np.maximum(np.einsum("ik,ik->k", Ls, xi), 0.0))


def evaluate(estimator: Estimator, hf, spec, test_params=None, fields=None, exact=None,
             jobs: int = 1) -> EstimatorReport:
    if fields is None:
        fields = make_fields(hf, np.atleast_2d(test_params), spec, jobs)
    if exact is None:
        exact = exact_dual_norms(hf, spec, fields)
    est = np.array([estimator(f.values) for f in fields])
    return EstimatorReport(estimator.method, np.asarray(exact, float), est, estimator.C_on,
                           dict(estimator.meta))


@dataclass
class BoundReport:
    errors: np.ndarray  # |L_{Jes,Qeq} - L|
    bounds: np.ndarray  # nan where indeterminate
    passed: np.ndarray
    indeterminate: np.ndarray
    delta_hat: float
    eps_hat: float
    probe_covers_eval: bool

    @property
    def all_pass(self) -> bool:
        return bool(np.all(self.passed | self.indeterminate))


def quadrature_error(space, rule, hf_weights, upsilon) -> float:
    """max_j |Q_eq(eta_j) - Q_hf(eta_j)| for one parameter."""
    u = _upsilon(upsilon)
    eta = integrand_matrix(space.tables, u)
    return float(np.max(np.abs(rule.weights @ eta[rule.points] - hf_weights @ eta), initial=0.0))


def a_priori_bound(space, rule, hf, spec, eval_params, probe_params, jobs: int = 1) -> BoundReport:
    """Error vs sqrt(Jes)*delta_hat + eps_hat^2 / (L + L_Jes); both constants
    are maxima over ``probe_params``."""
    eval_params = np.atleast_2d(eval_params)
    probe_params = np.atleast_2d(probe_params)
    probe_fields = make_fields(hf, probe_params, spec, jobs)
    delta_hat = max(quadrature_error(space, rule, hf.weights, f.values) for f in probe_fields)
    Lp = np.column_stack([assemble_functional_vector(hf, f, spec) for f in probe_fields])
    xp = riesz_solve(hf, Lp)
    eps_hat = max(projection_error(space, xp[:, k], hf) for k in range(xp.shape[1]))

    eval_fields = make_fields(hf, eval_params, spec, jobs)
    L = exact_dual_norms(hf, spec, eval_fields)
    LJ = np.array([es_estimate(space, hf.weights, f.values) for f in eval_fields])
    LQ = np.array([eq_es_estimate(space, rule, f.values) for f in eval_fields])
    err = np.abs(LQ - L)
    denom = L + LJ
    indet = denom < INDETERMINATE_TOL
    bound = np.full(len(L), np.nan)
    bound[~indet] = np.sqrt(space.J) * delta_hat + eps_hat**2 / denom[~indet]
    passed = np.zeros(len(L), bool)
    passed[~indet] = err[~indet] <= bound[~indet] + 1e-12
    probe_keys = {tuple(p) for p in probe_params}
    covers = all(tuple(p) in probe_keys for p in eval_params)
    return BoundReport(err, bound, passed, indet, float(delta_hat), float(eps_hat), covers)


def projection_identity_gap(hf, space, functional_vector) -> tuple:
    """Return (L - L_Jes, ||Pi_perp xi||^2 / (L + L_Jes), L) for one functional."""
    xi = riesz_solve(hf, functional_vector)
    L = float(np.sqrt(max(functional_vector @ xi, 0.0)))
    LJ = float(np.linalg.norm(space.basis.T @ functional_vector))
    r = xi - space.basis @ (space.basis.T @ (hf.gram @ xi))
    perp2 = float(r @ (hf.gram @ r))  # explicit residual, not the Pythagorean shortcut
    denom = L + LJ
    rhs = perp2 / denom if denom >= INDETERMINATE_TOL else float("nan")
    return L - LJ, rhs, L


__all__ = [
    "Estimator", "EstimatorReport", "BoundReport", "es_estimate", "eq_es_estimate", "online_cost",
    "ati_estimator", "ati_es_estimator", "eq_es_estimator", "evaluate", "exact_dual_norms",
    "a_priori_bound", "quadrature_error", "projection_identity_gap", "check_provenance", "dual_norm_exact",
]
