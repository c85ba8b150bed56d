"""Empirical test spaces: POD of Riesz representers in the X inner product."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .fem import HfDiscretization, riesz_solve
from .problems import FunctionalSpec, assemble_functional_vector, make_fields

EIG_CLAMP = 1e-14


@dataclass
class PodResult:
    basis: np.ndarray  # (n, J), orthonormal in the given inner product
    eigenvalues: np.ndarray  # all retained eigenvalues of the snapshot Gram matrix
    n_modes: int
    energy: float  # captured fraction


def pod(snapshots, gram, J=None) -> PodResult:
    """Method of snapshots.

    ``gram`` is the inner-product matrix (sparse or dense) or a vector of
    diagonal weights. ``J`` is a mode count, an energy fraction in (0, 1), or
    None for the full numerical rank.
    """
    S = np.asarray(snapshots, float)
    if S.ndim == 1:
        S = S[:, None]
    if S.shape[1] < 1:
        raise ValueError("pod needs at least one snapshot")
    WS = gram[:, None] * S if np.ndim(gram) == 1 else gram @ S
    C = S.T @ WS
    C = 0.5 * (C + C.T)
    lam, V = np.linalg.eigh(C)
    order = np.argsort(-lam, kind="stable")
    lam, V = lam[order], V[:, order]
    rank = int(np.sum(lam > EIG_CLAMP * max(lam[0], 0.0))) if lam[0] > 0 else 0
    lam_kept = np.clip(lam[:rank], 0.0, None)

    if J is None:
        n_modes = rank
    elif isinstance(J, float) and 0 < J < 1:
        cum = np.cumsum(lam_kept) / lam_kept.sum()
        n_modes = int(np.searchsorted(cum, J - 1e-15) + 1)
    else:
        n_modes = int(J)
        if n_modes > rank:
            warnings.warn(f"requested {n_modes} POD modes but numerical rank is {rank}", stacklevel=2)
            n_modes = rank
    basis = S @ (V[:, :n_modes] / np.sqrt(lam_kept[:n_modes]))
    basis = _reorthonormalize(basis, gram)
    energy = float(lam_kept[:n_modes].sum() / lam_kept.sum()) if rank else 0.0
    return PodResult(basis=basis, eigenvalues=lam_kept, n_modes=n_modes, energy=min(max(energy, 0.0), 1.0))


def _reorthonormalize(B, gram):
    # two passes of modified Gram-Schmidt; removes the loss of orthogonality
    # that the snapshot method suffers on small eigenvalues, span and order kept
    B = B.copy()
    for _ in range(2):
        for j in range(B.shape[1]):
            for i in range(j):
                B[:, j] -= _ip(B[:, i], B[:, j], gram) * B[:, i]
            B[:, j] /= np.sqrt(_ip(B[:, j], B[:, j], gram))
    return B


def _ip(u, v, gram):
    return float(u @ (gram * v)) if np.ndim(gram) == 1 else float(u @ (gram @ v))


@dataclass
class EmpiricalTestSpace:
    basis: np.ndarray  # (N, J), X-orthonormal
    eigenvalues: np.ndarray
    tables: np.ndarray  # (Nq, D, J): F(x_q; phi_j)
    components: tuple
    provenance: dict = field(default_factory=dict)

    @property
    def J(self) -> int:
        return self.basis.shape[1]

    def truncate(self, J: int) -> "EmpiricalTestSpace":
        """Nested subspace spanned by the first J modes."""
        if J > self.J:
            raise ValueError(f"cannot truncate a {self.J}-dimensional space to {J}")
        prov = dict(self.provenance, J=J)
        return replace(self, basis=self.basis[:, :J], tables=self.tables[:, :, :J], provenance=prov)


def f_tables(hf: HfDiscretization, basis: np.ndarray, components) -> np.ndarray:
    return np.stack([hf.tables[c] @ basis for c in components], axis=1)


def space_from_vectors(hf: HfDiscretization, vectors, components=("value",), **provenance) -> EmpiricalTestSpace:
    """X-orthonormal space spanning arbitrary coefficient vectors (order kept)."""
    V = np.asarray(vectors, float)
    if V.ndim == 1:
        V = V[:, None]
    basis = _reorthonormalize(V, hf.gram)
    return EmpiricalTestSpace(basis=basis, eigenvalues=np.ones(basis.shape[1]),
                              tables=f_tables(hf, basis, components), components=tuple(components),
                              provenance=dict(provenance, mesh=hf.digest, J=basis.shape[1]))


def riesz_snapshots(hf, spec: FunctionalSpec, params, jobs: int = 1) -> np.ndarray:
    fields = make_fields(hf, params, spec, jobs)
    Ls = np.column_stack([assemble_functional_vector(hf, f, spec) for f in fields])
    return riesz_solve(hf, Ls)


def build_test_space(hf: HfDiscretization, spec: FunctionalSpec, train_params, J, jobs: int = 1,
                     snapshots=None, seed=None) -> EmpiricalTestSpace:
    train_params = np.atleast_2d(train_params)
    if len(train_params) == 0:
        raise ValueError("empty training set")
    xi = riesz_snapshots(hf, spec, train_params, jobs) if snapshots is None else snapshots
    res = pod(xi, hf.gram, J)
    return EmpiricalTestSpace(
        basis=res.basis, eigenvalues=res.eigenvalues,
        tables=f_tables(hf, res.basis, spec.components), components=spec.components,
        provenance={"mesh": hf.digest, "J": res.n_modes, "n_train": len(train_params), "seed": seed,
                    "energy": res.energy, "problem": spec.name},
    )


def projection_error(space: EmpiricalTestSpace, xi, hf: HfDiscretization) -> float:
    """||Pi_perp xi||_X via the Pythagorean identity, clamped at zero."""
    Xxi = hf.gram @ xi
    coef = space.basis.T @ Xxi
    return float(np.sqrt(max(xi @ Xxi - coef @ coef, 0.0)))


def error_indicators(space, test_params, hf, spec, train_params=None, jobs: int = 1):
    """Return (E_inf, E_2, E_2_insample); the mean-square ones are not rooted."""
    test_params = np.atleast_2d(test_params)
    if len(test_params) == 0:
        raise ValueError("empty test set")
    xi = riesz_snapshots(hf, spec, test_params, jobs)
    errs = np.array([projection_error(space, xi[:, k], hf) for k in range(xi.shape[1])])
    e_in = None
    if train_params is not None:
        xt = riesz_snapshots(hf, spec, np.atleast_2d(train_params), jobs)
        e_in = float(np.mean([projection_error(space, xt[:, k], hf) ** 2 for k in range(xt.shape[1])]))
    return float(errs.max()), float(np.mean(errs**2)), e_in


def gaussian_embedding_estimate(hf: HfDiscretization, functional_vector, J: int, seed: int,
                                omega=None) -> float:
    """||Omega Q X^{-1} L||_2 with Omega ~ N(0, 1/J) entries and X = Q^T Q.

    ``omega`` overrides the random sketch (used to check the identity case).
    """
    Q = hf.cholesky_factor()
    if omega is None:
        rng = np.random.default_rng(seed)
        omega = rng.standard_normal((J, hf.n_dofs)) / np.sqrt(J)
    z = Q @ riesz_solve(hf, functional_vector)
    return float(np.linalg.norm(omega @ z))
