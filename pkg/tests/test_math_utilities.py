# -*- coding: utf-8 -*-
import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.domain_types import CoefficientMatrix, GroupStructure
from src.math_utilities import (
    cholesky_lower,
    design_block,
    frobenius_sq,
    group_operator_norm,
    l21_norm,
    log_binomial,
    log_det_from_cholesky,
    nearest_orthogonal,
    total_l21_norm,
    vectorize,
    )


def test_group_operator_norm_identity_and_diagonal():
    assert group_operator_norm(np.eye(3), GroupStructure.equal(3, 1)) == pytest.approx(1.0)
    assert group_operator_norm(np.diag([2.0, 1.0]), GroupStructure.equal(2, 1)) == pytest.approx(2.0)


def test_group_operator_norm_matches_svd(rng):
    X = rng.standard_normal((5, 4))
    expected = max(np.linalg.svd(X[:, :2], compute_uv=False)[0],
                   np.linalg.svd(X[:, 2:], compute_uv=False)[0])
    assert group_operator_norm(X, GroupStructure((2, 2))) == pytest.approx(expected, rel=1e-12)


def test_group_operator_norm_checks_columns():
    with pytest.raises(ValueError):
        group_operator_norm(np.eye(3), GroupStructure((2, 2)))
    assert group_operator_norm(np.zeros((0, 4)), GroupStructure((2, 2))) == 0.0


def test_l21_norm():
    assert l21_norm(np.zeros(4), GroupStructure((2, 2))) == 0.0
    v = np.array([1.0, -2.0, 3.0])
    assert l21_norm(v, GroupStructure.equal(3, 1)) == pytest.approx(np.abs(v).sum())
    assert l21_norm(np.array([3.0, 4.0]), GroupStructure((2,))) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        l21_norm(np.ones(3), GroupStructure((2,)))


def test_total_l21_norm_sums_columns():
    values = np.array([[3.0, 1.0], [4.0, 0.0]])
    assert total_l21_norm(values, GroupStructure((2,))) == pytest.approx(6.0)


def test_design_block_univariate_is_the_row():
    x = np.array([1.0, 2.0, 3.0])
    assert_allclose(design_block(x, 1), x[:, None])


def test_design_block_reproduces_row_product(rng):
    groups = GroupStructure((1, 2))
    values = rng.standard_normal((3, 2))
    x = rng.standard_normal(3)
    block = design_block(x, 2)
    assert block.shape == (6, 2)
    assert_allclose(vectorize(values) @ block, x @ values, atol=1e-12)
    assert_allclose(vectorize(CoefficientMatrix.zeros(groups, 2)) @ block, np.zeros(2))


def test_vectorize_stacks_columns():
    values = np.array([[1.0, 3.0], [2.0, 4.0]])
    assert_allclose(vectorize(values), [1.0, 2.0, 3.0, 4.0])


def test_cholesky_lower_reports_non_spd():
    lower = cholesky_lower(np.array([[4.0, 2.0], [2.0, 3.0]]))
    assert_allclose(lower @ lower.T, [[4.0, 2.0], [2.0, 3.0]])
    assert log_det_from_cholesky(lower) == pytest.approx(np.log(8.0))
    with pytest.raises(ValueError, match='positive definite'):
        cholesky_lower(np.array([[1.0, 2.0], [2.0, 1.0]]), 'Sigma')
    with pytest.raises(ValueError, match='symmetric'):
        cholesky_lower(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_log_binomial():
    assert log_binomial(5, 2) == pytest.approx(np.log(10.0))
    assert log_binomial(7, 0) == pytest.approx(0.0, abs=1e-12)


def test_nearest_orthogonal(rng):
    Q = nearest_orthogonal(np.eye(3) + 1e-3 * rng.standard_normal((3, 3)))
    assert_allclose(Q.T @ Q, np.eye(3), atol=1e-12)


def test_frobenius_sq():
    assert frobenius_sq(np.array([[1.0, 2.0], [2.0, 0.0]])) == pytest.approx(9.0)
