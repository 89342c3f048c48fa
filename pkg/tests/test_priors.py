# -*- coding: utf-8 -*-
from itertools import combinations

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, stats

from src.domain_types import CoefficientMatrix, HyperParams, SupportIndex, all_pairs
from src.priors import (
    SlabConstantTable,
    dimension_prior_table,
    iw_conjugate_update,
    log_dimension_prior,
    log_inverse_gaussian,
    log_inverse_wishart,
    log_slab_density,
    log_slab_prior,
    log_support_prior,
    sample_haar_orthogonal,
    sample_inverse_gaussian,
    sample_inverse_wishart,
    sample_slab,
    sample_wishart,
    slab_mass_estimate,
    slab_norm_const,
    wishart_tail_bounds,
    wishart_tail_log_bounds,
    )


def test_slab_norm_const_closed_forms():
    assert slab_norm_const(1) == pytest.approx(2.0, abs=1e-10)
    assert slab_norm_const(2) == pytest.approx(np.sqrt(2 * np.pi), abs=1e-10)
    value = slab_norm_const(10)
    assert 0.5 * np.sqrt(10) <= value <= 3 * np.sqrt(10)
    with pytest.raises(ValueError):
        slab_norm_const(0)


def test_slab_constant_table():
    table = SlabConstantTable(3)
    assert table[2] == pytest.approx(np.sqrt(2 * np.pi))
    assert table.as_array().shape == (3,)
    with pytest.raises(KeyError):
        table[4]


def test_slab_constant_table_logs_and_bounds():
    table = SlabConstantTable(2)
    assert table.log(1) == pytest.approx(np.log(2.0))
    with pytest.raises(KeyError):
        table.log(3)


def test_log_slab_prior_sums_block_densities(pair_groups):
    values = np.array([[3.0, 0.0], [4.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    beta = CoefficientMatrix.from_values(values, pair_groups)
    hp = HyperParams(lam=np.array([2.0, 0.5]))
    expected = log_slab_density(np.array([3.0, 4.0]), [2], 2.0) + log_slab_density(np.array([1.0, 0.0]), [2], 0.5)
    assert log_slab_prior(beta, hp) == pytest.approx(expected)


def test_log_slab_density_values():
    assert log_slab_density(np.zeros(1), [1], 1.0) == pytest.approx(np.log(0.5))
    assert log_slab_density(np.zeros(0), [], 1.0) == 0.0
    expected = 2 * np.log(2.0 / np.sqrt(2 * np.pi)) - 2.0 * 5.0
    assert log_slab_density(np.array([3.0, 4.0]), [2], 2.0) == pytest.approx(expected)
    with pytest.raises(ValueError):
        log_slab_density(np.zeros(1), [1], 0.0)
    with pytest.raises(ValueError):
        log_slab_density(np.zeros(3), [2], 1.0)


@pytest.mark.parametrize('m', [1, 2, 3])
@pytest.mark.parametrize('lam', [0.5, 1.0, 2.0])
def test_slab_integrates_to_one(m, lam):
    mass, error = slab_mass_estimate(m, lam, np.random.default_rng(100 * m + int(4 * lam)), n_draws=200_000)
    assert mass == pytest.approx(1.0, abs=0.02)
    assert error < 0.01


def test_slab_radius_is_exponential_for_single_coordinate(rng):
    draws = sample_slab([1] * 20_000, 1.0, rng)
    assert stats.kstest(np.abs(draws), 'expon').pvalue > 1e-3


def test_slab_radius_mean_and_symmetry(rng):
    count, size, lam = 20_000, 3, 2.0
    draws = sample_slab([size] * count, lam, rng).reshape(count, size)
    radii = np.linalg.norm(draws, axis=1)
    standard_error = np.sqrt(size) / lam / np.sqrt(count)
    assert abs(radii.mean() - size / lam) < 4 * standard_error
    coordinate_error = radii.std() / np.sqrt(count)
    assert np.all(np.abs(draws.mean(axis=0)) < 4 * coordinate_error)


def test_sample_slab_empty_and_invalid(rng):
    assert sample_slab([], 1.0, rng).shape == (0,)
    with pytest.raises(ValueError):
        sample_slab([1], -1.0, rng)


def test_dimension_prior_normalized():
    table = dimension_prior_table(G=4, d=3, n=50, p_max=2)
    assert np.exp(table).sum() == pytest.approx(1.0, abs=1e-12)
    assert len(table) == 13


def test_dimension_prior_geometric_example():
    table = dimension_prior_table(G=2, d=1, n=10, p_max=1, a=1.0)
    assert_allclose(np.exp(table), np.array([100.0, 10.0, 1.0]) / 111.0, rtol=1e-12)
    assert log_dimension_prior(0, 2, 1, 10, 1) == pytest.approx(np.log(100 / 111))
    with pytest.raises(ValueError):
        log_dimension_prior(3, 2, 1, 10, 1)


def test_support_prior_is_uniform_within_size():
    table = dimension_prior_table(G=2, d=2, n=10, p_max=1)
    singles = [SupportIndex.from_pairs([pair], 2, 2) for pair in [(0, 0), (0, 1), (1, 0), (1, 1)]]
    values = [log_support_prior(support, 2, 2, table) for support in singles]
    assert_allclose(values, np.full(4, table[1] - np.log(4.0)))
    assert log_support_prior(SupportIndex.empty(2, 2), 2, 2, table) == pytest.approx(table[0])


@pytest.mark.parametrize('G, d', [(3, 2), (4, 3), (12, 1)])
def test_support_prior_sums_to_dimension_prior(G, d):
    table = dimension_prior_table(G=G, d=d, n=20, p_max=2, a=0.7)
    totals = np.zeros(G * d + 1)
    for s in range(G * d + 1):
        for chosen in combinations(all_pairs(d, G), s):
            support = SupportIndex.from_pairs(chosen, d, G)
            totals[s] += np.exp(log_support_prior(support, G, d, table))
    assert_allclose(totals, np.exp(table), rtol=1e-10, atol=0)


def test_haar_one_dimensional_signs(rng):
    draws = np.array([sample_haar_orthogonal(1, rng)[0, 0] for _ in range(20_000)])
    assert set(np.unique(draws)) == {-1.0, 1.0}
    assert np.mean(draws > 0) == pytest.approx(0.5, abs=0.02)


def test_haar_moments(rng):
    draws = np.array([sample_haar_orthogonal(3, rng) for _ in range(20_000)])
    assert_allclose(draws[0].T @ draws[0], np.eye(3), atol=1e-12)
    assert_allclose(draws[:, :, 0].mean(axis=0), np.zeros(3), atol=0.03)
    assert_allclose(draws.var(axis=0), np.full((3, 3), 1 / 3), rtol=0.05)


def test_haar_left_invariance():
    generator = np.random.default_rng(97)
    Q = sample_haar_orthogonal(3, generator)
    count = 100_000
    plain = np.array([sample_haar_orthogonal(3, generator)[0, 0] for _ in range(count)])
    rotated = np.array([(Q @ sample_haar_orthogonal(3, generator))[0, 0] for _ in range(count)])
    assert stats.ks_2samp(plain, rotated).pvalue > 0.01


def test_inverse_gaussian_density():
    assert log_inverse_gaussian(1.0, 1.0, 1.0) == pytest.approx(-0.918939, abs=1e-6)
    mass, _ = integrate.quad(lambda x: np.exp(log_inverse_gaussian(x, 1.0, 1.0)), 0, 50, limit=200)
    assert mass == pytest.approx(1.0, abs=0.01)
    with pytest.raises(ValueError):
        log_inverse_gaussian(-1.0, 1.0, 1.0)


def test_inverse_gaussian_sample_mean(rng):
    mean, shape, count = 2.0, 3.0, 50_000
    draws = sample_inverse_gaussian(mean, shape, rng, size=count)
    assert abs(draws.mean() - mean) < 4 * np.sqrt(mean ** 3 / shape / count)


def test_inverse_wishart_scalar_reduction():
    nu, phi, sigma = 5.0, 2.0, 0.7
    expected = stats.invgamma(a=nu / 2, scale=phi / 2).logpdf(sigma)
    assert log_inverse_wishart(np.array([[sigma]]), nu, np.array([[phi]])) == pytest.approx(expected, abs=1e-10)


def test_inverse_wishart_matches_scipy(rng):
    phi = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, 0.2], [0.0, 0.2, 1.5]])
    sigma = stats.invwishart(df=7, scale=phi).rvs(random_state=rng)
    expected = stats.invwishart(df=7, scale=phi).logpdf(sigma)
    assert log_inverse_wishart(sigma, 7, phi) == pytest.approx(expected, abs=1e-8)


def test_conjugate_update_without_rows_is_identity():
    nu, phi = iw_conjugate_update(4.0, np.eye(2), np.zeros((0, 2)))
    assert nu == 4.0
    assert_allclose(phi, np.eye(2))


def test_inverse_wishart_sample_mean(rng):
    d, nu = 2, 7
    phi = np.array([[1.0, 0.2], [0.2, 0.5]])
    draws = np.array([sample_inverse_wishart(nu, phi, rng) for _ in range(20_000)])
    assert_allclose(draws.mean(axis=0), phi / (nu - d - 1), atol=0.02)
    assert_allclose(draws[0], draws[0].T)


def test_wishart_sample_mean(rng):
    psi = np.array([[1.0, 0.5], [0.5, 2.0]])
    draws = sample_wishart(6, psi, rng, size=20_000)
    assert_allclose(draws.mean(axis=0), 6 * psi, rtol=0.05, atol=0.05)
    with pytest.raises(ValueError):
        sample_wishart(0.5, psi, rng)


def test_wishart_upper_bound_is_vacuous_at_boundary():
    bounds = wishart_tail_log_bounds(10, np.eye(3), t1=30.0, t2=1.0, t3=0.5, a=[1.0, 2.0, 3.0])
    assert bounds['upper'] == pytest.approx(0.0, abs=1e-12)


def test_wishart_tail_bounds_hold(rng):
    report = wishart_tail_bounds(10, np.eye(3), t1=60.0, t2=1.0, t3=1.0, a=[2.0, 6.0, 12.0],
                                 rng=rng, n_draws=10_000)
    bounds = report.bounds
    assert report.empirical['upper'] <= bounds['upper']
    assert report.empirical['lower'] <= bounds['lower']
    assert report.empirical['band'] >= bounds['band']
    assert report.holds()
    assert report.to_dict()['n_draws'] == 10_000


@pytest.mark.parametrize('kwargs', [
    dict(t1=10.0, t2=1.0, t3=0.5, a=[1.0, 1.0, 1.0]),
    dict(t1=30.0, t2=0.0, t3=0.5, a=[1.0, 1.0, 1.0]),
    dict(t1=30.0, t2=1.0, t3=1.5, a=[1.0, 1.0, 1.0]),
    dict(t1=30.0, t2=1.0, t3=0.5, a=[2.0, 1.0, 3.0]),
    ])
def test_wishart_tail_bounds_validate(kwargs):
    with pytest.raises(ValueError):
        wishart_tail_log_bounds(10, np.eye(3), **kwargs)
