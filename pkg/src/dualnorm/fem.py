"""P1 finite elements on a structured crossed-diagonal triangulation.

Provides the high-fidelity space, the element-interior quadrature rule, the
H^1 Gram matrix and Riesz solves used by every other module.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# barycentric coordinates of the 3-point degree-2 rule (all points interior)
_BARY = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])

COMPONENTS = ("value", "dx", "dy")


class ConfigurationError(ValueError):
    pass


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray  # (n_nodes, 2)
    triangles: np.ndarray  # (n_elem, 3), counter-clockwise
    boundary_edges: np.ndarray  # (n_bedges, 3): i, j, label in 1..4
    blocks: np.ndarray  # (n_elem,), 1..9

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.triangles.shape[0]

    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def digest(self) -> str:
        h = hashlib.sha256()
        for a in (self.nodes, self.triangles, self.boundary_edges, self.blocks):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()[:16]


def build_mesh(nx: int, domain=((0.0, 3.0), (0.0, 3.0))) -> Mesh:
    """Crossed-diagonal triangulation of a rectangle with ``nx`` cells per side.

    Each cell is split into four triangles through an added center node.
    Boundary labels: 1 bottom, 2 right, 3 top, 4 left. Blocks of the 3x3
    partition are numbered row-major starting at the bottom-left.
    """
    if nx < 3 or nx % 3 != 0:
        raise ConfigurationError(f"nx must be a positive multiple of 3, got {nx}")
    (x0, x1), (y0, y1) = domain
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, nx + 1)
    gx, gy = np.meshgrid(xs, ys)
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    ccx, ccy = np.meshgrid(cx, cy)
    centers = np.column_stack([ccx.ravel(), ccy.ravel()])
    nodes = np.vstack([grid, centers])

    def g(i, j):
        return j * (nx + 1) + i

    tris, blocks, bedges = [], [], []
    n_grid = (nx + 1) ** 2
    for j in range(nx):
        for i in range(nx):
            c = n_grid + j * nx + i
            v00, v10, v11, v01 = g(i, j), g(i + 1, j), g(i + 1, j + 1), g(i, j + 1)
            tris += [(v00, v10, c), (v10, v11, c), (v11, v01, c), (v01, v00, c)]
            blk = (3 * j // nx) * 3 + (3 * i // nx) + 1
            blocks += [blk] * 4
            if j == 0:
                bedges.append((v00, v10, 1))
            if i == nx - 1:
                bedges.append((v10, v11, 2))
            if j == nx - 1:
                bedges.append((v11, v01, 3))
            if i == 0:
                bedges.append((v01, v00, 4))
    return Mesh(
        nodes=nodes,
        triangles=np.array(tris, dtype=np.int64),
        boundary_edges=np.array(bedges, dtype=np.int64),
        blocks=np.array(blocks, dtype=np.int64),
    )


def save_mesh(mesh: Mesh, path) -> None:
    lines = [f"nodes {mesh.n_nodes} elements {mesh.n_elements}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.nodes]
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"boundary {len(mesh.boundary_edges)}")
    lines += [f"{a} {b} {lab}" for a, b, lab in mesh.boundary_edges]
    lines.append("blocks")
    lines += [str(b) for b in mesh.blocks]
    Path(path).write_text("\n".join(lines) + "\n")


def load_mesh(path) -> Mesh:
    lines = Path(path).read_text().splitlines()
    head = lines[0].split()
    n_nodes, n_elem = int(head[1]), int(head[3])
    pos = 1
    nodes = np.array([[float(t) for t in ln.split()] for ln in lines[pos : pos + n_nodes]])
    pos += n_nodes
    tris = np.array([[int(t) for t in ln.split()] for ln in lines[pos : pos + n_elem]], dtype=np.int64)
    pos += n_elem
    n_b = int(lines[pos].split()[1])
    pos += 1
    bedges = np.array([[int(t) for t in ln.split()] for ln in lines[pos : pos + n_b]], dtype=np.int64)
    pos += n_b + 1
    blocks = np.array([int(t) for t in lines[pos : pos + n_elem]], dtype=np.int64)
    return Mesh(nodes=nodes, triangles=tris, boundary_edges=bedges.reshape(-1, 3), blocks=blocks)


@dataclass
class HfDiscretization:
    """High-fidelity space: P1 basis, quadrature tables, Gram matrix.

    ``tables[c]`` is a sparse (Nq x N) matrix holding component ``c`` of the
    basis functions at the quadrature points, c in ("value", "dx", "dy").
    Treat instances as immutable once built.
    """

    mesh: Mesh
    points: np.ndarray  # (Nq, 2)
    weights: np.ndarray  # (Nq,)
    point_element: np.ndarray  # (Nq,)
    tables: dict
    gram: sp.csc_matrix
    _lu: object = field(repr=False)
    _chol: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_nodes

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def volume(self) -> float:
        return float(self.weights.sum())

    @property
    def digest(self) -> str:
        return self.mesh.digest()

    def integrate(self, values: np.ndarray) -> float:
        return float(self.weights @ values)

    def evaluate(self, coeffs: np.ndarray, component: str = "value") -> np.ndarray:
        return self.tables[component] @ coeffs

    def cholesky_factor(self) -> np.ndarray:
        """Dense upper-triangular Q with X = Q^T Q (built on first use)."""
        if self._chol is None:
            self._chol = scipy.linalg.cholesky(self.gram.toarray(), lower=False)
        return self._chol


def build_hf(mesh: Mesh) -> HfDiscretization:
    areas = mesh.areas()
    if np.any(areas <= 0):
        raise ConfigurationError("mesh has non-positive element areas")
    ne, n = mesh.n_elements, mesh.n_nodes
    p = mesh.nodes[mesh.triangles]  # (ne, 3, 2)

    points = np.einsum("qk,ekd->eqd", _BARY, p).reshape(-1, 2)
    weights = np.repeat(areas / 3.0, 3)
    point_element = np.repeat(np.arange(ne), 3)

    # gradients of barycentric coordinates, constant per element
    x, y = p[:, :, 0], p[:, :, 1]
    two_a = 2.0 * areas
    bx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1) / two_a[:, None]
    by = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1) / two_a[:, None]

    rows = np.repeat(np.arange(3 * ne), 3)
    cols = np.repeat(mesh.triangles, 3, axis=0).ravel()
    shape = (3 * ne, n)
    val = np.tile(_BARY, (ne, 1)).ravel()
    dx = np.repeat(bx, 3, axis=0).ravel()
    dy = np.repeat(by, 3, axis=0).ravel()
    tables = {
        "value": sp.csr_matrix((val, (rows, cols)), shape=shape),
        "dx": sp.csr_matrix((dx, (rows, cols)), shape=shape),
        "dy": sp.csr_matrix((dy, (rows, cols)), shape=shape),
    }
    W = sp.diags(weights)
    gram = sum(t.T @ W @ t for t in tables.values())
    gram = sp.csc_matrix(0.5 * (gram + gram.T))
    lu = spla.splu(gram, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                   options={"SymmetricMode": True})
    if np.any(lu.U.diagonal() <= 0):
        raise np.linalg.LinAlgError("Gram matrix is not positive definite")
    return HfDiscretization(mesh=mesh, points=points, weights=weights, point_element=point_element,
                            tables=tables, gram=gram, _lu=lu)


def _check_vector(hf: HfDiscretization, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim == 0 or v.shape[0] != hf.n_dofs or v.size == 0:
        raise DimensionError(f"expected leading dimension {hf.n_dofs}, got shape {v.shape}")
    return v


def riesz_solve(hf: HfDiscretization, functional_vector) -> np.ndarray:
    """Solve X xi = L; accepts a vector or an (N, k) block of vectors."""
    rhs = _check_vector(hf, functional_vector)
    xi = hf._lu.solve(rhs)
    # one step of iterative refinement keeps the residual at roundoff level
    xi += hf._lu.solve(rhs - hf.gram @ xi)
    return xi


def dual_norm_exact(hf: HfDiscretization, functional_vector) -> float:
    L = _check_vector(hf, functional_vector)
    xi = riesz_solve(hf, L)
    return float(np.sqrt(max(L @ xi, 0.0)))


def inner_product(hf: HfDiscretization, u, v) -> float:
    u = _check_vector(hf, u)
    v = _check_vector(hf, v)
    return float(u @ (hf.gram @ v))


def norm(hf: HfDiscretization, v) -> float:
    return float(np.sqrt(max(inner_product(hf, v, v), 0.0)))
