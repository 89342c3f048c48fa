# -*- coding: utf-8 -*-
import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.domain_types import (
    CoefficientMatrix,
    CovarianceEigen,
    Dataset,
    GroupStructure,
    HyperParams,
    SupportIndex,
    all_pairs,
    )
from src.math_utilities import group_operator_norm


def test_group_structure_offsets_and_columns():
    groups = GroupStructure((1, 3, 2))
    assert groups.G == 3
    assert groups.p == 6
    assert groups.p_max == 3
    assert list(groups.offsets) == [0, 1, 4, 6]
    assert groups.columns(1) == slice(1, 4)
    assert list(groups.column_index([2, 0])) == [0, 4, 5]
    assert groups.column_index([]).shape == (0,)


@pytest.mark.parametrize('sizes', [(), (2, 0), (1, -1)])
def test_group_structure_rejects_bad_sizes(sizes):
    with pytest.raises(ValueError):
        GroupStructure(sizes)


def test_block_norms():
    groups = GroupStructure((2, 1))
    values = np.array([[3.0, 0.0], [4.0, 0.0], [-2.0, 1.0]])
    assert_allclose(groups.block_norms(values), [[5.0, 0.0], [2.0, 1.0]])
    assert_allclose(groups.block_norms(values[:, 0]), [[5.0], [2.0]])
    with pytest.raises(ValueError):
        groups.block_norms(np.zeros((4, 1)))


def test_dataset_checks_rows_and_freezes():
    data = Dataset(np.ones((3, 2)), np.zeros((3, 1)))
    assert (data.n, data.p, data.d) == (3, 2, 1)
    with pytest.raises(ValueError):
        data.X[0, 0] = 5.0
    with pytest.raises(ValueError, match='rows'):
        Dataset(np.ones((3, 2)), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        Dataset(np.array([[np.nan]]), np.zeros((1, 1)))
    empty = Dataset.empty(4, 2)
    assert empty.n == 0 and empty.p == 4 and empty.d == 2


def test_support_index_pairs_and_moves():
    support = SupportIndex.from_pairs([(1, 2), (0, 0), (1, 0)], d=2, n_groups=3)
    assert support.s == 3
    assert support.pairs() == [(0, 0), (1, 0), (1, 2)]
    assert support.size_per_column == (1, 2)
    assert support.key() == ((0,), (0, 2))
    assert len(support.inactive_pairs()) == 3

    grown = support.with_pair(0, 1)
    assert grown.s == 4 and grown.contains(0, 1)
    assert grown.without_pair(0, 1) == support
    with pytest.raises(ValueError):
        support.with_pair(0, 0)
    with pytest.raises(ValueError):
        support.without_pair(0, 2)
    with pytest.raises(ValueError):
        SupportIndex.from_pairs([(0, 3)], d=1, n_groups=3)
    with pytest.raises(ValueError):
        SupportIndex.from_pairs([(0, 1), (0, 1)], d=1, n_groups=3)


def test_support_mask_and_active_dimension():
    groups = GroupStructure((1, 3, 2))
    support = SupportIndex.from_pairs([(0, 1), (1, 2)], d=2, n_groups=3)
    mask = support.mask()
    assert mask.shape == (3, 2)
    assert SupportIndex.from_mask(mask) == support
    assert support.p_S(groups) == 5
    assert support.active_sizes(0, groups) == [3]


def test_coefficient_matrix_support_follows_values():
    groups = GroupStructure((2, 2))
    values = np.array([[0.0, 1.0], [0.0, 2.0], [3.0, 0.0], [0.0, 0.0]])
    beta = CoefficientMatrix.from_values(values, groups)
    assert beta.support.pairs() == [(0, 1), (1, 0)]
    assert_allclose(beta.active_vector(), [3.0, 0.0, 1.0, 2.0])
    assert_allclose(beta.block(1, 0), [1.0, 2.0])

    replaced = beta.with_active_vector(np.array([1.0, 1.0, 2.0, 2.0]))
    assert replaced.support == beta.support
    assert_allclose(replaced.values[2:4, 0], [1.0, 1.0])
    with pytest.raises(ValueError):
        beta.with_active_vector(np.ones(3))

    with pytest.raises(ValueError, match='support'):
        CoefficientMatrix(values, SupportIndex.empty(2, 2), groups)


def test_coefficient_matrix_block_updates():
    groups = GroupStructure((2, 1))
    beta = CoefficientMatrix.zeros(groups, 1)
    grown = beta.with_block(0, 1, np.array([0.5]))
    assert grown.support.pairs() == [(0, 1)]
    assert grown.without_block(0, 1).support.s == 0


def test_covariance_eigen_round_trip():
    sigma = np.array([[2.0, 0.5], [0.5, 1.0]])
    factored = CovarianceEigen.from_matrix(sigma)
    assert factored.D[0] >= factored.D[1]
    assert_allclose(factored.reconstruct(), sigma, atol=1e-12)
    assert_allclose(factored.precision(), np.linalg.inv(sigma), atol=1e-12)
    assert factored.log_det() == pytest.approx(np.log(np.linalg.det(sigma)))


def test_covariance_eigen_rejects_invalid():
    with pytest.raises(ValueError):
        CovarianceEigen.from_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValueError):
        CovarianceEigen(np.array([[1.0, 1.0], [0.0, 1.0]]), np.ones(2))
    with pytest.raises(ValueError):
        CovarianceEigen(np.eye(2), np.array([1.0, 0.0]))


def test_hyper_params_default_rate(rng):
    groups = GroupStructure.equal(5, 2)
    X = rng.standard_normal((30, groups.p))
    hp = HyperParams.default(X, groups, 3)
    expected = group_operator_norm(X, groups) / max(5 ** 0.5, 30)
    assert_allclose(hp.lam, np.full(3, expected))
    assert hp.wishart_dof == 9.0
    assert_allclose(hp.wishart_scale, np.eye(3))


def test_hyper_params_without_rows_uses_unit_rate():
    groups = GroupStructure.equal(3, 1)
    hp = HyperParams.default(np.zeros((0, 3)), groups, 1, dim_exponent=0.5)
    assert_allclose(hp.lam, [1.0])
    assert hp.dim_exponent == 0.5
    assert_allclose(hp.with_lam(2.0).lam, [2.0])


def test_hyper_params_validation():
    with pytest.raises(ValueError):
        HyperParams(lam=np.array([0.0]))
    with pytest.raises(ValueError):
        HyperParams(lam=np.array([1.0]), ig_shape=-1.0)
    with pytest.raises(ValueError):
        HyperParams(lam=np.ones(2), wishart_dof=0.5)


def test_all_pairs_order():
    assert all_pairs(2, 2) == [(0, 0), (0, 1), (1, 0), (1, 1)]
