"""Empirical interpolation on quadrature-point fields.

Scalar mode interpolates with a unit lower-triangular matrix
``B[i, m] = psi_m(x_i)``; vector mode uses least squares at the selected
points through a stored pseudo-inverse.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .testspace import pod

SCALAR = "scalar-interpolatory"
VECTOR = "vector-least-squares"
RANK_TOL = 1e-13


@dataclass
class EimModel:
    mode: str
    basis: np.ndarray  # (Nq, D, M): psi_m (scalar) or zeta_m (vector)
    points: np.ndarray  # (M,) indices into the quadrature points
    B: np.ndarray  # (M, M) scalar, (M*D, M) vector
    B_pinv: np.ndarray | None = None

    @property
    def M(self) -> int:
        return self.basis.shape[2]

    @property
    def D(self) -> int:
        return self.basis.shape[1]

    def truncate(self, M: int) -> "EimModel":
        """Model built from the first M greedy steps (bases are nested)."""
        if self.mode == SCALAR:
            return EimModel(SCALAR, self.basis[:, :, :M], self.points[:M], self.B[:M, :M])
        Bm = self.B[: M * self.D, :M]
        return EimModel(VECTOR, self.basis[:, :, :M], self.points[:M], Bm, np.linalg.pinv(Bm))


def _as_fields(snapshots):
    S = np.asarray(snapshots, float)
    if S.ndim == 2:
        S = S[:, None, :]
    return S  # (Nq, D, n)


def _pod_fields(S, M, weights):
    nq, D, n = S.shape
    flat = S.reshape(nq * D, n)
    w = np.ones(nq) if weights is None else np.asarray(weights, float)
    res = pod(flat, np.repeat(w, D), None)
    zeta = res.basis[:, : min(M, res.n_modes)]
    return zeta.reshape(nq, D, -1)


def eim_build_scalar(snapshots, M: int, weights=None) -> EimModel:
    """POD in the weighted L^2 product, then the greedy point selection.

    Stops early (fewer than M functions) once the interpolation residual falls
    below the rank tolerance; ``model.M`` reports the achieved size.
    """
    S = _as_fields(snapshots)
    if S.shape[1] != 1:
        raise ValueError("scalar EIM needs D = 1 snapshots")
    zeta = _pod_fields(S, M, weights)[:, 0, :]
    scale = np.max(np.abs(S))
    nq = zeta.shape[0]
    psi = np.zeros((nq, 0))
    pts = []
    for m in range(zeta.shape[1]):
        z = zeta[:, m]
        if m == 0:
            r = z.copy()
        else:
            coef = scipy.linalg.solve_triangular(psi[pts], z[pts], lower=True, unit_diagonal=True)
            r = z - psi @ coef
        k = int(np.argmax(np.abs(r)))  # first maximizer: lowest index wins ties
        if abs(r[k]) < RANK_TOL * scale:
            break
        p = r / r[k]
        p[pts] = 0.0
        p[k] = 1.0
        psi = np.column_stack([psi, p])
        pts.append(k)
    points = np.array(pts, dtype=np.int64)
    B = psi[points]
    return EimModel(SCALAR, psi[:, None, :], points, B)


def eim_build_vector(snapshots, M: int, weights=None) -> EimModel:
    S = _as_fields(snapshots)
    zeta = _pod_fields(S, M, weights)
    nq, D, _ = zeta.shape
    scale = np.max(np.abs(S))
    pts = []
    for m in range(zeta.shape[2]):
        z = zeta[:, :, m]
        if m == 0:
            r = z
        else:
            Bm = zeta[pts][:, :, :m].reshape(m * D, m)
            coef = np.linalg.lstsq(Bm, z[pts].reshape(-1), rcond=None)[0]
            r = z - zeta[:, :, :m] @ coef
        nr = np.linalg.norm(r, axis=1)
        k = int(np.argmax(nr))
        if nr[k] < RANK_TOL * scale:
            break
        pts.append(k)
    Mf = len(pts)
    points = np.array(pts, dtype=np.int64)
    basis = zeta[:, :, :Mf]
    B = basis[points].reshape(Mf * D, Mf)
    if np.linalg.matrix_rank(B) < Mf:
        raise np.linalg.LinAlgError("vector EIM matrix lost full column rank")
    return EimModel(VECTOR, basis, points, B, np.linalg.pinv(B))


def eim_coefficients(model: EimModel, point_values) -> np.ndarray:
    v = np.asarray(point_values, float)
    if model.mode == SCALAR:
        return scipy.linalg.solve_triangular(model.B, v.reshape(-1), lower=True, unit_diagonal=True,
                                             check_finite=False)
    return model.B_pinv @ v.reshape(-1)


def eim_interpolate(model: EimModel, point_values):
    """Return (field (Nq, D), coefficients) from values at the EIM points."""
    coef = eim_coefficients(model, point_values)
    return model.basis @ coef, coef


def eim_quadrature_weights(model: EimModel, hf_weights) -> np.ndarray:
    """Weights w with sum_i w_i f(x_i) = Q_hf(I_M f) (scalar mode)."""
    if model.mode != SCALAR:
        raise ValueError("EIM-induced quadrature is defined for scalar fields")
    q = hf_weights @ model.basis[:, 0, :]
    return scipy.linalg.solve_triangular(model.B, q, lower=True, unit_diagonal=True, trans="T")
