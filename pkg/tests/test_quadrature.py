import numpy as np
import pytest

from conftest import smooth_vectors, train_params
from dualnorm.mio import support
from dualnorm.problems import integrand_matrix, make_fields
from dualnorm.quadrature import (MIO, MemoryBudgetError, assemble_problem, constraint_residual,
                                 divide_and_conquer, effective_delta, eim_eq, l1_eq, load_rule, mio_eq,
                                 partition_points, save_rule, training_residual)
from dualnorm.testspace import build_test_space, space_from_vectors


@pytest.fixture(scope="module")
def thermal_setup(hf6, thermal6):
    tr = train_params(thermal6, 6)
    space = build_test_space(hf6, thermal6, tr, 3)
    fields = make_fields(hf6, tr, thermal6)
    return space, tr, fields


def naive_problem_rows(hf, space, fields):
    rows = []
    for f in fields:
        for j in range(space.J):
            rows.append([sum(f.values[q, d] * space.tables[q, d, j] for d in range(space.tables.shape[1]))
                         for q in range(hf.n_points)])
    rows.append([1.0] * hf.n_points)
    return np.array(rows)


def test_problem_assembly_matches_loops(hf3, thermal6):
    from dualnorm.problems import thermal_block_spec

    spec = thermal_block_spec(hf3, "phi2")
    tr = train_params(spec, 2)
    space = space_from_vectors(hf3, smooth_vectors(hf3, 2))
    prob = assemble_problem(hf3, space, spec, tr, 1e-3)
    ref = naive_problem_rows(hf3, space, make_fields(hf3, tr, spec))
    np.testing.assert_allclose(prob.G, ref, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(prob.y, ref @ hf3.weights, rtol=1e-13)
    assert prob.K == 2 * 2 + 1 and prob.rows[-1] == "identity"


def test_invalid_delta_and_memory_budget(hf6, thermal6, thermal_setup):
    space, tr, fields = thermal_setup
    with pytest.raises(ValueError):
        assemble_problem(hf6, space, thermal6, tr, 0.0, fields=fields)
    with pytest.raises(MemoryBudgetError):
        assemble_problem(hf6, space, thermal6, tr, 1e-3, fields=fields, memory_budget=10)


def test_l1_rule_is_feasible_sparse_and_nonnegative(hf6, thermal6, thermal_setup):
    space, tr, fields = thermal_setup
    prob = assemble_problem(hf6, space, thermal6, tr, 1e-3, fields=fields)
    rule = l1_eq(prob)
    assert np.all(rule.weights > 0)
    assert constraint_residual(prob, rule) <= prob.delta + 1e-12
    # a vertex has no more nonzeros than rows
    assert rule.Q <= prob.K
    assert rule.Q < hf6.n_points


def test_effective_delta_keeps_a_margin(hf6, thermal6, thermal_setup):
    space, tr, fields = thermal_setup
    prob = assemble_problem(hf6, space, thermal6, tr, 1e-3, fields=fields)
    assert 0.999 * prob.delta < effective_delta(prob) < prob.delta
    prob.delta = 1e-14
    assert effective_delta(prob) == 0.5e-14


def test_free_weights_allow_fewer_points(hf6, thermal6, thermal_setup):
    space, tr, fields = thermal_setup
    pos = l1_eq(assemble_problem(hf6, space, thermal6, tr, 1e-2, fields=fields))
    free_prob = assemble_problem(hf6, space, thermal6, tr, 1e-2, nonneg=False, fields=fields)
    free = l1_eq(free_prob)
    assert constraint_residual(free_prob, free) <= 1e-2 + 1e-12
    assert np.abs(free.weights).sum() <= pos.weights.sum() + 1e-9
    assert np.all(free.info["rho_plus"] * free.info["rho_minus"] == 0)


def test_huge_tolerance_needs_almost_no_points(hf6, thermal6, thermal_setup):
    space, tr, fields = thermal_setup
    rule = l1_eq(assemble_problem(hf6, space, thermal6, tr, 1e6, fields=fields))
    assert rule.Q <= 1


def test_mio_improves_on_l1_and_stays_feasible(hf6, thermal6, thermal_setup):
    space, tr, fields = thermal_setup
    prob = assemble_problem(hf6, space, thermal6, tr[:3], 5e-2, fields=fields[:3])
    l1 = l1_eq(prob)
    rule, sol = mio_eq(prob, warm_start=l1, node_limit=20)
    assert rule.Q <= l1.Q
    assert constraint_residual(prob, rule) <= prob.delta + 1e-9
    assert rule.method == MIO and sol.nodes <= 20


def test_partition_covers_every_point_once(hf6):
    parts = partition_points(hf6, 5)
    allp = np.sort(np.concatenate(parts))
    np.testing.assert_array_equal(allp, np.arange(hf6.n_points))
    with pytest.raises(ValueError):
        partition_points(hf6, 0)


@pytest.mark.parametrize("n_part", [2, 4])
def test_divide_and_conquer_is_feasible(hf6, thermal6, thermal_setup, n_part):
    space, tr, fields = thermal_setup
    res = divide_and_conquer(hf6, space, thermal6, tr, 1e-3, n_part, fields=fields)
    full = assemble_problem(hf6, space, thermal6, tr, 1e-3, fields=fields)
    assert constraint_residual(full, res.rule) <= 1e-3 + 1e-9
    # local solutions concatenated satisfy the global constraints too
    assert np.abs(full.G @ res.concatenated - full.y).max() <= 1e-3 + 1e-9
    assert set(res.rule.points) <= set(res.candidates)


def test_single_partition_reproduces_direct_l1(hf6, thermal6, thermal_setup):
    space, tr, fields = thermal_setup
    direct = l1_eq(assemble_problem(hf6, space, thermal6, tr, 1e-3, fields=fields))
    res = divide_and_conquer(hf6, space, thermal6, tr, 1e-3, 1, fields=fields)
    np.testing.assert_array_equal(res.rule.points, direct.points)
    np.testing.assert_allclose(res.rule.weights, direct.weights, rtol=1e-12)


def test_divide_and_conquer_mio_backend(hf6, thermal6, thermal_setup):
    space, tr, fields = thermal_setup
    l1 = divide_and_conquer(hf6, space, thermal6, tr[:3], 1e-2, 2, fields=fields[:3])
    mio = divide_and_conquer(hf6, space, thermal6, tr[:3], 1e-2, 2, backend="mio", fields=fields[:3],
                             mio_node_limit=10)
    assert mio.rule.Q <= l1.rule.Q
    with pytest.raises(ValueError):
        divide_and_conquer(hf6, space, thermal6, tr[:3], 1e-2, 2, backend="simplex", fields=fields[:3])


def test_affine_sparsity_bound(hf6, affine6):
    spec = affine6.spec()
    tr = train_params(spec, 10)
    for J in (2, 3):
        space = space_from_vectors(hf6, smooth_vectors(hf6, J))
        rule = l1_eq(assemble_problem(hf6, space, spec, tr, 1e-8))
        assert rule.Q <= affine6.M * J + 1


def test_eim_rule_is_exact_on_its_training_span(hf6, thermal_setup):
    space, tr, fields = thermal_setup
    S = np.column_stack([integrand_matrix(space.tables, f.values) for f in fields])
    rule = eim_eq(hf6, S, S.shape[1])
    assert np.isnan(rule.delta)
    scale = np.abs(hf6.weights @ S).max()
    assert training_residual(rule, S, hf6.weights) <= 1e-8 * scale


def test_rule_file_round_trip(tmp_path, hf6, thermal6, thermal_setup):
    space, tr, fields = thermal_setup
    rule = l1_eq(assemble_problem(hf6, space, thermal6, tr, 1e-3, fields=fields), n_hf=hf6.n_points)
    save_rule(rule, tmp_path / "r.txt")
    back = load_rule(tmp_path / "r.txt")
    np.testing.assert_array_equal(back.points, rule.points)
    np.testing.assert_array_equal(back.weights, rule.weights)
    assert (back.method, back.delta, back.n_hf, back.Q) == (rule.method, rule.delta, rule.n_hf, rule.Q)
    assert support(back.dense()).size == rule.Q
