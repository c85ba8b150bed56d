"""Parameterized integrand fields and the functionals built from them.

A functional has the form L_mu(v) = sum_q rho_q Upsilon_mu(x_q) . F(x_q; v),
with F(x; v) a selection of {v, dv/dx1, dv/dx2}.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import COMPONENTS, DimensionError, HfDiscretization

THERMAL_BOX = ((0.7,) * 8, (1.3,) * 8)


@dataclass(frozen=True)
class ParameterBox:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise ValueError("ParameterBox needs lower < upper componentwise")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lower) + np.asarray(self.upper))

    def contains(self, mu) -> bool:
        mu = np.asarray(mu)
        return bool(np.all(mu >= self.lower) and np.all(mu <= self.upper))


def sample_parameters(box: ParameterBox, n: int, seed: int) -> np.ndarray:
    """iid uniform draws, shape (n, P)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(box.lower, float), np.asarray(box.upper, float)
    return lo + (hi - lo) * rng.random((n, box.dim))


@dataclass
class FunctionalSpec:
    """Upsilon evaluator plus the F-selector it is paired with."""

    name: str
    components: tuple
    evaluator: Callable[[np.ndarray], np.ndarray]
    box: ParameterBox
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        bad = [c for c in self.components if c not in COMPONENTS]
        if bad:
            raise ValueError(f"unknown F components {bad}")

    @property
    def D(self) -> int:
        return len(self.components)


@dataclass
class IntegrandField:
    values: np.ndarray  # (Nq, D)
    mu: np.ndarray


def make_functional_field(hf: HfDiscretization, mu, spec: FunctionalSpec) -> IntegrandField:
    vals = np.asarray(spec.evaluator(np.asarray(mu, float)), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    if vals.shape != (hf.n_points, spec.D):
        raise DimensionError(f"field has shape {vals.shape}, expected {(hf.n_points, spec.D)}")
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError(f"non-finite integrand values for mu={mu}")
    return IntegrandField(values=vals, mu=np.asarray(mu, float))


def make_fields(hf, params, spec, jobs: int = 1) -> list:
    """Fields for many parameters; order follows ``params`` for any ``jobs``."""
    if jobs <= 1:
        return [make_functional_field(hf, mu, spec) for mu in params]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda mu: make_functional_field(hf, mu, spec), params))


def assemble_functional_vector(hf: HfDiscretization, field, spec: FunctionalSpec) -> np.ndarray:
    values = field.values if isinstance(field, IntegrandField) else np.asarray(field, float)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape != (hf.n_points, spec.D):
        raise DimensionError(f"field has shape {values.shape}, expected {(hf.n_points, spec.D)}")
    out = np.zeros(hf.n_dofs)
    for d, comp in enumerate(spec.components):
        out += hf.tables[comp].T @ (hf.weights * values[:, d])
    return out


def integrand_matrix(tables: np.ndarray, upsilon: np.ndarray) -> np.ndarray:
    """eta(x_q; phi_j) = sum_d Upsilon_d(x_q) F_d(x_q; phi_j); tables is (n, D, J)."""
    return np.einsum("qd,qdj->qj", upsilon, tables)


# ----------------------------------------------------------------- thermal block


def phi_apply(u, which: str = "phi1") -> np.ndarray:
    """Logistic loss log(1 + e^(u+4)) or hinge max(u+4, 0)."""
    s = np.asarray(u, float) + 4.0
    if which in ("phi1", "logistic", 1):
        return np.logaddexp(0.0, s)
    if which in ("phi2", "hinge", 2):
        return np.maximum(s, 0.0)
    raise ValueError(f"unknown loss {which!r}")


class ThermalBlock:
    """Operators of the 3x3 thermal block problem, assembled once per mesh.

    kappa = 1 on block 1 and mu_i on block i+1; Neumann data g = 1 on the
    bottom side, 0 on the right, 1 - 2 x1 on the top; u = 0 on the left.
    """

    def __init__(self, hf: HfDiscretization):
        self.hf = hf
        mesh = hf.mesh
        w_el = hf.point_element
        self.block_stiffness = []
        for b in range(1, 10):
            wq = hf.weights * (mesh.blocks[w_el] == b)
            W = sp.diags(wq)
            K = hf.tables["dx"].T @ W @ hf.tables["dx"] + hf.tables["dy"].T @ W @ hf.tables["dy"]
            self.block_stiffness.append(sp.csr_matrix(K))
        self.load = self._neumann_load()
        dirichlet = np.unique(mesh.boundary_edges[mesh.boundary_edges[:, 2] == 4][:, :2])
        self.dirichlet = dirichlet
        self.free = np.setdiff1d(np.arange(hf.n_dofs), dirichlet)

    def _neumann_load(self) -> np.ndarray:
        mesh = self.hf.mesh
        f = np.zeros(mesh.n_nodes)
        gp = 0.5 + np.array([-1, 1]) / (2 * np.sqrt(3.0))
        for i, j, lab in mesh.boundary_edges:
            if lab not in (1, 3):
                continue
            a, b = mesh.nodes[i], mesh.nodes[j]
            length = np.linalg.norm(b - a)
            for t in gp:
                x = (1 - t) * a + t * b
                g = 1.0 if lab == 1 else 1.0 - 2.0 * x[0]
                f[i] += 0.5 * length * g * (1 - t)
                f[j] += 0.5 * length * g * t
        return f

    def kappa(self, mu) -> np.ndarray:
        return np.concatenate([[1.0], np.asarray(mu, float)])

    def stiffness(self, mu) -> sp.csr_matrix:
        k = self.kappa(mu)
        return sum(kb * Kb for kb, Kb in zip(k, self.block_stiffness))

    def solve(self, mu) -> np.ndarray:
        mu = np.asarray(mu, float)
        if mu.shape != (8,):
            raise DimensionError(f"thermal block needs 8 parameters, got {mu.shape}")
        if np.any(mu < 0.7) or np.any(mu > 1.3):
            warnings.warn(f"mu outside [0.7, 1.3]^8: {mu}", stacklevel=2)
        if np.any(mu <= 0):
            raise ValueError("conductivities must be positive")
        K = self.stiffness(mu).tocsc()
        fr = self.free
        Kff = K[fr][:, fr]
        rhs = self.load[fr]
        u = np.zeros(self.hf.n_dofs)
        uf = spla.spsolve(Kff, rhs)
        res = np.linalg.norm(Kff @ uf - rhs) / max(np.linalg.norm(rhs), 1e-300)
        if not np.isfinite(res) or res > 1e-10:
            raise np.linalg.LinAlgError(f"thermal block solve failed (relative residual {res:.2e})")
        u[fr] = uf
        return u


_THERMAL_CACHE: dict = {}


def thermal_block_solve(hf: HfDiscretization, mu) -> np.ndarray:
    tb = _THERMAL_CACHE.get(id(hf))
    if tb is None or tb.hf is not hf:
        tb = ThermalBlock(hf)
        _THERMAL_CACHE[id(hf)] = tb
    return tb.solve(mu)


def thermal_block_spec(hf: HfDiscretization, loss: str = "phi1", store=None) -> FunctionalSpec:
    """F(x; v) = v(x), Upsilon_mu = Phi(u(x; mu)). ``store`` caches u(mu)."""
    tb = ThermalBlock(hf)
    _THERMAL_CACHE[id(hf)] = tb

    def evaluator(mu):
        u = store.get(mu) if store is not None else None
        if u is None:
            u = tb.solve(mu)
            if store is not None:
                store.put(mu, u)
        return phi_apply(hf.tables["value"] @ u, loss)[:, None]

    return FunctionalSpec(name=f"thermal-block-{loss}", components=("value",), evaluator=evaluator,
                          box=ParameterBox(*THERMAL_BOX), meta={"loss": loss})


# ----------------------------------------------------------- affine synthetic


@dataclass
class AffineSyntheticFunctional:
    """Upsilon_mu = sum_m Theta_m(mu) zeta_m with Theta(mu) = mu."""

    terms: np.ndarray  # (M, Nq, D)
    components: tuple
    box: ParameterBox

    @property
    def M(self) -> int:
        return self.terms.shape[0]

    def theta(self, mu) -> np.ndarray:
        return np.asarray(mu, float)

    def __call__(self, mu) -> np.ndarray:
        return np.einsum("m,mqd->qd", self.theta(mu), self.terms)

    def spec(self) -> FunctionalSpec:
        return FunctionalSpec(name="affine-synthetic", components=self.components, evaluator=self,
                              box=self.box, meta={"M": self.M})


def make_affine_synthetic(hf: HfDiscretization, M: int, components=("value",), seed: int = 0,
                          box=None) -> AffineSyntheticFunctional:
    """Smooth, linearly independent Gaussian-bump terms at random centers."""
    rng = np.random.default_rng(seed)
    x = hf.points
    lo, hi = x.min(axis=0), x.max(axis=0)
    D = len(components)
    terms = np.empty((M, hf.n_points, D))
    for m in range(M):
        for d in range(D):
            c = lo + (hi - lo) * rng.random(2)
            width = 0.3 + 0.5 * rng.random()
            r2 = ((x - c) ** 2).sum(axis=1) / (hi - lo).max() ** 2
            terms[m, :, d] = 0.5 + np.exp(-r2 / width) * (1 + rng.random())
    if box is None:
        box = ParameterBox((0.7,) * M, (1.3,) * M)
    return AffineSyntheticFunctional(terms=terms, components=tuple(components), box=box)
