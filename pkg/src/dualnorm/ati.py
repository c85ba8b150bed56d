"""Approximation-then-integration: an EIM surrogate of Upsilon makes the
functional parametrically affine, so its dual norm is a quadratic form."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eim import SCALAR, EimModel, eim_build_scalar, eim_build_vector, eim_coefficients
from .fem import riesz_solve
from .problems import assemble_functional_vector, make_fields


@dataclass
class AtiModel:
    eim: EimModel
    functionals: np.ndarray  # (N, M): vectors of L_m
    riesz: np.ndarray  # (N, M): xi^m
    A_off: np.ndarray  # (M, M)

    @property
    def M(self) -> int:
        return self.eim.M

    def truncate(self, M: int) -> "AtiModel":
        return AtiModel(self.eim.truncate(M), self.functionals[:, :M], self.riesz[:, :M], self.A_off[:M, :M])

    def theta(self, upsilon) -> np.ndarray:
        """Theta_M(mu) from Upsilon_mu, reading only the EIM points."""
        ups = np.asarray(upsilon, float)
        if ups.ndim == 1:
            ups = ups[:, None]
        return eim_coefficients(self.eim, ups[self.eim.points])

    def h_matrix(self, space) -> np.ndarray:
        """(H_ati)_{j,m} = L_m(phi_j)."""
        return space.basis.T @ self.functionals


def ati_from_snapshots(hf, spec, upsilon_snapshots, M: int) -> AtiModel:
    """``upsilon_snapshots``: (Nq, D, n) values of Upsilon at training parameters."""
    S = np.asarray(upsilon_snapshots, float)
    if S.ndim == 2:
        S = S[:, None, :]
    if S.shape[1] == 1:
        eim = eim_build_scalar(S, M, weights=hf.weights)
    else:
        eim = eim_build_vector(S, M, weights=hf.weights)
    Ls = np.column_stack([assemble_functional_vector(hf, eim.basis[:, :, m], spec) for m in range(eim.M)])
    xi = riesz_solve(hf, Ls)
    A = xi.T @ (hf.gram @ xi)
    A = 0.5 * (A + A.T)
    return AtiModel(eim=eim, functionals=Ls, riesz=xi, A_off=A)


def ati_build(hf, spec, train_params, M: int, fields=None, jobs: int = 1) -> AtiModel:
    if fields is None:
        fields = make_fields(hf, np.atleast_2d(train_params), spec, jobs)
    S = np.stack([f.values for f in fields], axis=2)
    return ati_from_snapshots(hf, spec, S, M)


def ati_estimate(model: AtiModel, upsilon=None, theta=None) -> float:
    """sqrt(Theta^T A_off Theta), negative roundoff clamped to zero."""
    th = model.theta(upsilon) if theta is None else np.asarray(theta, float)
    return float(np.sqrt(max(th @ model.A_off @ th, 0.0)))


def ati_es_estimate(model: AtiModel, space, upsilon=None, theta=None, H=None) -> float:
    """Euclidean norm of H_ati Theta_M(mu)."""
    th = model.theta(upsilon) if theta is None else np.asarray(theta, float)
    H = model.h_matrix(space) if H is None else H
    return float(np.linalg.norm(H @ th))


def surrogate_field(model: AtiModel, upsilon) -> np.ndarray:
    return model.eim.basis @ model.theta(upsilon)


def is_scalar(model: AtiModel) -> bool:
    return model.eim.mode == SCALAR
