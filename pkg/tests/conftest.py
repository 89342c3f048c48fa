# -*- coding: utf-8 -*-
"""Shared fixtures: seeded generators and small regression instances."""
import numpy as np
import pytest

from src.domain_types import CoefficientMatrix, Dataset, GroupStructure, HyperParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def pair_groups():
    return GroupStructure((2, 2))


@pytest.fixture
def tiny_instance():
    """G = 3 singleton groups, d = 1, n = 100, unit noise; group 0 active."""
    generator = np.random.default_rng(7)
    groups = GroupStructure.equal(3, 1)
    X = generator.standard_normal((100, 3))
    beta0 = np.array([[0.8], [0.0], [0.0]])
    Y = X @ beta0 + generator.standard_normal((100, 1))
    data = Dataset(X, Y)
    return data, groups, CoefficientMatrix.from_values(beta0, groups), np.eye(1)


@pytest.fixture
def two_response_instance():
    """G = 4 groups of size 2, d = 2, n = 60 with a correlated noise covariance."""
    generator = np.random.default_rng(11)
    groups = GroupStructure.equal(4, 2)
    X = generator.standard_normal((60, groups.p))
    values = np.zeros((groups.p, 2))
    values[0:2, 0] = [1.0, -0.5]
    values[4:6, 1] = [0.7, 0.7]
    sigma0 = np.array([[1.0, 0.3], [0.3, 0.5]])
    noise = generator.standard_normal((60, 2)) @ np.linalg.cholesky(sigma0).T
    data = Dataset(X, X @ values + noise)
    return data, groups, CoefficientMatrix.from_values(values, groups), sigma0


@pytest.fixture
def hyper(two_response_instance):
    data, groups, _, _ = two_response_instance
    return HyperParams.default(data.X, groups, data.d)
