# -*- coding: utf-8 -*-
import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import minimize

from src.domain_types import CoefficientMatrix, GroupStructure, SupportIndex
from src.math_utilities import group_operator_norm
from src.metrics import (
    RateConstants,
    compatibility_number,
    covariance_loss,
    design_rates,
    dimension_threshold,
    effective_dimension,
    modal_support,
    recovery_report,
    restricted_eigenvalue,
    selection_report,
    theoretical_rates,
    )


def test_restricted_eigenvalue_of_identity():
    quantity = restricted_eigenvalue(np.eye(3), GroupStructure.equal(3, 1), 2)
    assert quantity.value == pytest.approx(1.0)
    assert quantity.exact and quantity.subsets == 3


def test_restricted_eigenvalue_of_duplicated_column():
    X = np.random.default_rng(5).standard_normal((10, 3))
    X[:, 1] = X[:, 0]
    groups = GroupStructure.equal(3, 1)
    assert restricted_eigenvalue(X, groups, 2).value == pytest.approx(0.0, abs=1e-12)
    assert restricted_eigenvalue(X, groups, 1).value > 0


def test_restricted_eigenvalue_bounds_random_directions(rng):
    groups = GroupStructure((2, 1, 2, 1, 1))
    X = rng.standard_normal((20, groups.p))
    value = restricted_eigenvalue(X, groups, 2).value
    norm_sq = group_operator_norm(X, groups) ** 2
    for _ in range(2000):
        chosen = rng.choice(groups.G, size=2, replace=False)
        b = np.zeros(groups.p)
        index = groups.column_index(chosen)
        b[index] = rng.standard_normal(len(index))
        ratio = np.sum((X @ b) ** 2) / (norm_sq * np.sum(b ** 2))
        assert ratio >= value - 1e-12


def test_restricted_eigenvalue_decreases_with_dimension(rng):
    groups = GroupStructure.equal(6, 2)
    X = rng.standard_normal((30, groups.p))
    values = [restricted_eigenvalue(X, groups, s).value for s in range(1, 7)]
    assert all(later <= earlier + 1e-12 for earlier, later in zip(values, values[1:]))
    assert restricted_eigenvalue(X, groups, 10).value == pytest.approx(values[-1])


def test_restricted_eigenvalue_greedy_search(rng):
    groups = GroupStructure.equal(5, 1)
    X = rng.standard_normal((15, 5))
    exact = restricted_eigenvalue(X, groups, 2)
    approximate = restricted_eigenvalue(X, groups, 2, budget=1, rng=rng)
    assert not approximate.exact
    assert approximate.value >= exact.value - 1e-12
    assert approximate.value == pytest.approx(exact.value, rel=1e-9)


def test_restricted_eigenvalue_matches_random_search():
    generator = np.random.default_rng(53)
    groups = GroupStructure((2, 1, 2, 1))
    X = generator.standard_normal((12, groups.p))
    exact = restricted_eigenvalue(X, groups, 2)
    assert exact.exact
    gram = X.T @ X / group_operator_norm(X, groups) ** 2

    best = np.inf
    for _ in range(300):
        index = groups.column_index(sorted(generator.choice(groups.G, size=2, replace=False)))
        A = gram[np.ix_(index, index)]

        def rayleigh(b):
            return (b @ A @ b) / (b @ b)

        def gradient(b):
            return 2 * (A @ b - rayleigh(b) * b) / (b @ b)

        result = minimize(rayleigh, generator.standard_normal(len(index)), jac=gradient,
                          method='BFGS', options=dict(gtol=1e-10))
        best = min(best, result.fun)
    assert best == pytest.approx(exact.value, abs=1e-6)


def test_restricted_eigenvalue_validates_dimension():
    groups = GroupStructure.equal(3, 1)
    with pytest.raises(ValueError):
        restricted_eigenvalue(np.eye(3), groups, 0)
    with pytest.raises(ValueError):
        restricted_eigenvalue(np.eye(3), groups, 7, d=2)


def test_compatibility_dominates_restricted_eigenvalue(rng):
    groups = GroupStructure((2, 2, 1))
    X = rng.standard_normal((12, groups.p))
    for s in (1, 2, 3):
        compatibility = compatibility_number(X, groups, s, rng=rng)
        assert compatibility.upper_bound
        assert compatibility.value >= restricted_eigenvalue(X, groups, s).value - 1e-12


def test_compatibility_of_singletons_at_one():
    X = np.diag([1.0, 2.0, 3.0])
    groups = GroupStructure.equal(3, 1)
    assert compatibility_number(X, groups, 1).value == pytest.approx(1.0 / 9.0)


def test_rate_formulas_by_hand():
    n, G, d, p_max, s0 = 400, 50, 2, 2, 3
    rates = theoretical_rates(n, G, d, p_max, s0)
    expected_eps = max(np.sqrt(s0 * np.log(G) / n), np.sqrt(s0 * p_max * np.log(n) / n),
                       np.sqrt(d ** 2 * np.log(n) / n))
    assert rates.eps_n == pytest.approx(expected_eps)
    assert rates.eps_n == pytest.approx(np.sqrt(6 * np.log(400) / 400))
    assert rates.s_star == pytest.approx(3.0)
    assert rates.prediction_threshold == pytest.approx(n * expected_eps ** 2)
    assert rates.beta_min_threshold == pytest.approx(n * expected_eps ** 2)
    assert rates.eps_n_iw == pytest.approx(np.sqrt(8 * np.log(400) / 400))
    assert rates.s_star_iw == pytest.approx(max(3.0, 8 * np.log(400) / (2 * np.log(400))))
    assert rates.s_tilde == 6


def test_rates_with_singleton_groups():
    rates = theoretical_rates(100, 1000, 1, 1, 5)
    assert rates.eps_n == pytest.approx(np.sqrt(5 * np.log(1000) / 100))
    assert rates.inputs['lam_max'] == pytest.approx(1.0 / 1000)
    assert rates.beta_bar == pytest.approx(5 * np.log(1000) * 1000)


def test_rate_constants_scale_thresholds():
    base = theoretical_rates(200, 20, 1, 1, 2)
    scaled = theoretical_rates(200, 20, 1, 1, 2, constants=RateConstants(M1=2.0, M3=3.0))
    assert scaled.prediction_threshold == pytest.approx(2 * base.prediction_threshold)
    assert scaled.beta_min_threshold == pytest.approx(3 * base.beta_min_threshold)
    with pytest.raises(ValueError):
        RateConstants(M1=0.0)
    with pytest.raises(ValueError):
        theoretical_rates(1, 20, 1, 1, 2)


def test_dimension_threshold_power():
    assert dimension_threshold(100, 10, 2, 1, 0) == pytest.approx(4.0)
    assert dimension_threshold(100, 10, 2, 1, 0, power=3) == pytest.approx(8.0)


def test_design_rates_uses_the_design(rng):
    groups = GroupStructure.equal(5, 1)
    X = rng.standard_normal((100, 5))
    rates = design_rates(X, groups, 1, 1)
    assert rates.inputs['x_norm'] == pytest.approx(group_operator_norm(X, groups))
    assert rates.inputs['phi_l2'] ** 2 == pytest.approx(restricted_eigenvalue(X, groups, 2).value)
    tighter = design_rates(X, groups, 1, 1, compatibility=True)
    assert tighter.l21_threshold <= rates.l21_threshold * (1 + 1e-9)
    degenerate = X.copy()
    degenerate[:, 1] = 0.0
    with pytest.raises(ValueError):
        design_rates(degenerate, groups, 1, 1)


def test_recovery_report():
    groups = GroupStructure((2, 1))
    beta0 = np.zeros((3, 1))
    beta = np.array([[3.0], [4.0], [1.0]])
    report = recovery_report(beta, beta0, np.eye(3), groups)
    assert report.prediction == pytest.approx(26.0)
    assert report.frobenius == pytest.approx(26.0)
    assert report.l21 == pytest.approx(36.0)
    with pytest.raises(ValueError):
        recovery_report(beta, beta0, np.eye(2), groups)


def test_selection_report(tiny_instance):
    _, _, beta0, _ = tiny_instance
    assert selection_report(beta0, beta0).exact_match
    guess = SupportIndex.from_pairs([(0, 1)], 1, 3)
    report = selection_report(guess, beta0)
    assert (report.missed, report.false) == (1, 1)
    assert report.to_dict()['missed_pairs'] == [[0, 0]]
    with pytest.raises(TypeError):
        selection_report({0}, beta0)


def test_effective_dimension_and_modal_support():
    groups = GroupStructure.equal(2, 1)
    zero = CoefficientMatrix.zeros(groups, 1)
    one = CoefficientMatrix.from_values(np.array([[1.0], [0.0]]), groups)
    chain = [zero, one, one, one]
    assert effective_dimension(chain) == {0: 0.25, 1: 0.75}
    assert effective_dimension([0, 1, 1, 2]) == {0: 0.25, 1: 0.5, 2: 0.25}
    key, frequency = modal_support(chain)
    assert key == ((0,),) and frequency == pytest.approx(0.75)
    with pytest.raises(ValueError):
        effective_dimension([])


def test_covariance_loss():
    assert covariance_loss(np.eye(2), np.eye(2)) == 0.0
    assert covariance_loss(np.array([[2.0]]), np.array([[1.0]])) == pytest.approx(1.0)
    assert_allclose(covariance_loss(2 * np.eye(2), np.eye(2)), 2.0)
    with pytest.raises(ValueError):
        covariance_loss(np.eye(2), np.eye(3))
