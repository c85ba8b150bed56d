import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dualnorm.fem import (ConfigurationError, DimensionError, build_hf, build_mesh, dual_norm_exact,
                          inner_product, load_mesh, norm, riesz_solve, save_mesh)


def test_mesh_counts_nx3():
    mesh = build_mesh(3)
    assert mesh.n_nodes == 25
    assert mesh.n_elements == 36
    assert len(mesh.boundary_edges) == 12
    assert np.all(mesh.areas() > 0)
    assert mesh.areas().sum() == pytest.approx(9.0, rel=1e-14)


def test_mesh_counts_nx12():
    mesh = build_mesh(12)
    assert mesh.n_nodes == 13 * 13 + 144
    assert mesh.n_elements == 576


@pytest.mark.parametrize("nx", [0, 2, 4, 7])
def test_mesh_rejects_bad_sizes(nx):
    with pytest.raises(ConfigurationError):
        build_mesh(nx)


def test_boundary_labels_sit_on_their_sides():
    mesh = build_mesh(6)
    for i, j, lab in mesh.boundary_edges:
        a, b = mesh.nodes[i], mesh.nodes[j]
        coord, value = {1: (1, 0.0), 2: (0, 3.0), 3: (1, 3.0), 4: (0, 0.0)}[lab]
        assert a[coord] == pytest.approx(value) and b[coord] == pytest.approx(value)


def test_blocks_are_unit_squares():
    mesh = build_mesh(6)
    centroids = mesh.nodes[mesh.triangles].mean(axis=1)
    expected = np.floor(centroids[:, 1]) * 3 + np.floor(centroids[:, 0]) + 1
    np.testing.assert_array_equal(mesh.blocks, expected.astype(int))
    assert np.bincount(mesh.blocks)[1:].tolist() == [mesh.n_elements // 9] * 9


def test_mesh_file_round_trip(tmp_path):
    mesh = build_mesh(6)
    save_mesh(mesh, tmp_path / "m.txt")
    back = load_mesh(tmp_path / "m.txt")
    assert back.digest() == mesh.digest()


def test_quadrature_integrates_quadratics_exactly(hf6):
    x, y = hf6.points.T
    # exact integrals over [0,3]^2
    assert hf6.integrate(np.ones_like(x)) == pytest.approx(9.0, rel=1e-14)
    assert hf6.integrate(x * y) == pytest.approx(81 / 4, rel=1e-13)
    assert hf6.integrate(x**2) == pytest.approx(27.0, rel=1e-13)
    assert hf6.integrate(y**2 - 2 * x * y) == pytest.approx(27.0 - 81 / 2, rel=1e-13)


def test_quadrature_points_are_interior(hf6):
    p = hf6.points
    assert np.all((p > 0) & (p < 3))


def test_tables_reproduce_linear_functions(hf6):
    x, y = hf6.mesh.nodes.T
    v = 2.0 * x - 0.5 * y + 1.0
    np.testing.assert_allclose(hf6.evaluate(v), 2.0 * hf6.points[:, 0] - 0.5 * hf6.points[:, 1] + 1.0,
                               atol=1e-13)
    np.testing.assert_allclose(hf6.evaluate(v, "dx"), 2.0, atol=1e-12)
    np.testing.assert_allclose(hf6.evaluate(v, "dy"), -0.5, atol=1e-12)


def naive_gram(mesh):
    """Element-by-element H1 Gram matrix with the exact P1 mass matrix."""
    n = mesh.n_nodes
    X = np.zeros((n, n))
    for tri in mesh.triangles:
        p = mesh.nodes[tri]
        T = np.array([[1, *p[0]], [1, *p[1]], [1, *p[2]]])
        area = 0.5 * abs(np.linalg.det(T))
        grads = np.linalg.inv(T)[1:].T  # row k: gradient of barycentric k
        K = area * grads @ grads.T
        M = area / 12.0 * (np.ones((3, 3)) + np.eye(3))
        X[np.ix_(tri, tri)] += K + M
    return X


def test_gram_matches_elementwise_assembly(hf3):
    np.testing.assert_allclose(hf3.gram.toarray(), naive_gram(hf3.mesh), rtol=1e-13, atol=1e-14)


def test_gram_is_symmetric_positive_definite(hf6):
    G = hf6.gram.toarray()
    np.testing.assert_array_equal(G, G.T)
    assert np.linalg.eigvalsh(G).min() > 0


def test_riesz_solve_matches_dense_inverse(hf6, rng):
    L = rng.standard_normal((hf6.n_dofs, 3))
    ref = np.linalg.solve(hf6.gram.toarray(), L)
    np.testing.assert_allclose(riesz_solve(hf6, L), ref, rtol=1e-10, atol=1e-12)


def test_dual_norm_of_a_representer(hf6, rng):
    v = rng.standard_normal(hf6.n_dofs)
    L = hf6.gram @ v
    assert dual_norm_exact(hf6, L) == pytest.approx(norm(hf6, v), rel=1e-12)


def test_dual_norm_is_sup_over_directions(hf6, rng):
    L = rng.standard_normal(hf6.n_dofs)
    exact = dual_norm_exact(hf6, L)
    for _ in range(20):
        v = rng.standard_normal(hf6.n_dofs)
        assert L @ v / norm(hf6, v) <= exact * (1 + 1e-12)


def test_zero_functional_has_zero_norm(hf3):
    assert dual_norm_exact(hf3, np.zeros(hf3.n_dofs)) == 0.0


def test_dimension_errors(hf3):
    with pytest.raises(DimensionError):
        riesz_solve(hf3, np.ones(hf3.n_dofs + 1))
    with pytest.raises(DimensionError):
        inner_product(hf3, np.ones(3), np.ones(3))


def test_cholesky_factor_reproduces_gram(hf3):
    Q = hf3.cholesky_factor()
    np.testing.assert_allclose(Q.T @ Q, hf3.gram.toarray(), atol=1e-12)
    assert sp.issparse(hf3.gram)


vectors = arrays(np.float64, 25, elements=st.floats(-1e3, 1e3, allow_nan=False, allow_subnormal=False))


@settings(max_examples=40, deadline=None)
@given(a=vectors, b=vectors, s=st.floats(-100, 100))
def test_dual_norm_is_a_norm(hf3, a, b, s):
    na, nb = dual_norm_exact(hf3, a), dual_norm_exact(hf3, b)
    assert dual_norm_exact(hf3, a + b) <= na + nb + 1e-9 * (1 + na + nb)
    assert dual_norm_exact(hf3, s * a) == pytest.approx(abs(s) * na, rel=1e-9, abs=1e-9)
