# -*- coding: utf-8 -*-
"""
Gaussian log-likelihood of Y_i = X_i beta + e_i, e_i ~ N(0, Sigma), and the
divergences between two parameter values (beta, Sigma) and (beta0, Sigma0):
average Kullback-Leibler divergence and variation, the order-1/2 Renyi
divergence split into its covariance and mean parts, and the squared
Hellinger distance between the two covariances.

Determinants and inverses go through Cholesky factors; a failed
factorization is reported as a non-SPD input.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from src.domain_types import CoefficientMatrix, CovarianceEigen
from src.math_utilities import cholesky_lower, log_det_from_cholesky


@dataclass(frozen=True)
class DivergenceBreakdown:
    '''Renyi-1/2 divergence summed over rows: covariance part + mean part.'''
    cov_term: float
    mean_term: float

    @property
    def total(self):
        return self.cov_term + self.mean_term

    def to_dict(self):
        return dict(cov_term=self.cov_term, mean_term=self.mean_term, total=self.total)


def _values(beta):
    if isinstance(beta, CoefficientMatrix):
        return beta.values
    return np.atleast_2d(np.asarray(beta, dtype=float))


def _matrix(sigma, name='Sigma'):
    if isinstance(sigma, CovarianceEigen):
        return sigma.reconstruct()
    return np.atleast_2d(np.asarray(sigma, dtype=float))


def residuals(beta, data):
    values = _values(beta)
    if values.shape != (data.p, data.d):
        raise ValueError(
            f'coefficients have shape {values.shape}, expected {(data.p, data.d)}')
    return data.Y - data.X @ values


def residual_log_likelihood(R, sigma):
    '''
    Gaussian log-likelihood of the n x d residual rows R under N(0, Sigma).

    Takes the eigen-factored covariance directly when given one.
    '''
    n, d = R.shape
    if isinstance(sigma, CovarianceEigen):
        if sigma.d != d:
            raise ValueError(f'covariance is {sigma.d} x {sigma.d}, expected {d} x {d}')
        rotated = R @ sigma.P
        quadratic = float(np.sum(rotated ** 2 / sigma.D))
        log_det = sigma.log_det()
    else:
        lower = cholesky_lower(_matrix(sigma), 'Sigma')
        if lower.shape[0] != d:
            raise ValueError(f'covariance is {lower.shape[0]} x {lower.shape[0]}, expected {d} x {d}')
        whitened = scipy.linalg.solve_triangular(lower, R.T, lower=True)
        quadratic = float(np.sum(whitened ** 2))
        log_det = log_det_from_cholesky(lower)
    return -0.5 * n * d * np.log(2 * np.pi) - 0.5 * n * log_det - 0.5 * quadratic


def log_likelihood(beta, sigma, data):
    '''
    Log-likelihood l_n(beta, Sigma).

    Parameters
    ----------
    beta : CoefficientMatrix or np.ndarray
        p x d coefficients
    sigma : CovarianceEigen or np.ndarray
        d x d covariance
    data : Dataset

    Returns
    -------
    float
        -(nd/2) log(2 pi) - (n/2) log det Sigma
        - 1/2 sum_i ||Sigma^(-1/2) (Y_i - X_i beta)'||^2

    '''
    return residual_log_likelihood(residuals(beta, data), sigma)


def _pair_factors(sigma, sigma0):
    sigma = _matrix(sigma)
    sigma0 = _matrix(sigma0, 'Sigma0')
    if sigma.shape != sigma0.shape:
        raise ValueError(f'covariances have shapes {sigma.shape} and {sigma0.shape}')
    return sigma, sigma0, cholesky_lower(sigma, 'Sigma'), cholesky_lower(sigma0, 'Sigma0')


def _mean_shift(beta, beta0, data):
    return data.X @ (_values(beta) - _values(beta0))


def kl_mean(beta, sigma, beta0, sigma0, data):
    '''
    Average Kullback-Leibler divergence n^-1 K(f0, f):

        1/2 (tr(Sigma^-1 Sigma0) - d - log det(Sigma^-1 Sigma0)
             + n^-1 sum_i ||Sigma^(-1/2) (beta - beta0)' X_i'||^2)
    '''
    sigma, sigma0, lower, lower0 = _pair_factors(sigma, sigma0)
    d = sigma.shape[0]
    ratio = scipy.linalg.cho_solve((lower, True), sigma0)
    log_det_ratio = log_det_from_cholesky(lower0) - log_det_from_cholesky(lower)
    mean_part = 0.0
    if data.n > 0:
        M = _mean_shift(beta, beta0, data)
        whitened = scipy.linalg.solve_triangular(lower, M.T, lower=True)
        mean_part = float(np.sum(whitened ** 2)) / data.n
    return float(0.5 * (np.trace(ratio) - d - log_det_ratio + mean_part))


def kl_variation(beta, sigma, beta0, sigma0, data):
    '''
    Average Kullback-Leibler variation n^-1 V(f0, f):

        1/2 (tr((Sigma^-1 Sigma0)^2) - 2 tr(Sigma^-1 Sigma0) + d)
        + n^-1 sum_i ||Sigma0^(1/2) Sigma^-1 (beta - beta0)' X_i'||^2
    '''
    sigma, sigma0, lower, _ = _pair_factors(sigma, sigma0)
    d = sigma.shape[0]
    ratio = scipy.linalg.cho_solve((lower, True), sigma0)
    covariance_part = 0.5 * (np.trace(ratio @ ratio) - 2 * np.trace(ratio) + d)
    mean_part = 0.0
    if data.n > 0:
        M = _mean_shift(beta, beta0, data)
        precision_shift = scipy.linalg.cho_solve((lower, True), M.T)
        mean_part = float(np.sum(precision_shift * (sigma0 @ precision_shift))) / data.n
    return float(covariance_part + mean_part)


def _log_affinity_cov(sigma, sigma0, lower, lower0):
    '''log of det(Sigma)^1/4 det(Sigma0)^1/4 / det((Sigma + Sigma0)/2)^1/2.'''
    lower_mid = cholesky_lower((sigma + sigma0) / 2, '(Sigma + Sigma0)/2')
    return (0.25 * log_det_from_cholesky(lower) + 0.25 * log_det_from_cholesky(lower0)
            - 0.5 * log_det_from_cholesky(lower_mid)), lower_mid


def row_log_affinities(beta, sigma, beta0, sigma0, data):
    '''log of the Bhattacharyya affinity between the two row densities, per row.'''
    sigma, sigma0, lower, lower0 = _pair_factors(sigma, sigma0)
    log_cov, lower_mid = _log_affinity_cov(sigma, sigma0, lower, lower0)
    if data.n == 0:
        return np.zeros(0)
    M = _mean_shift(beta, beta0, data)
    whitened = scipy.linalg.solve_triangular(lower_mid, M.T, lower=True)
    return log_cov - np.sum(whitened ** 2, axis=0) / 8.0


def renyi_half(beta, sigma, beta0, sigma0, data):
    '''
    Renyi divergence of order 1/2 summed over the n rows.

    Returns
    -------
    DivergenceBreakdown
        cov_term = -n log(det(Sigma)^1/4 det(Sigma0)^1/4 / det(Sigma_bar)^1/2)
        mean_term = 1/8 sum_i X_i (beta - beta0) Sigma_bar^-1 (beta - beta0)' X_i'
        with Sigma_bar = (Sigma + Sigma0)/2.

    '''
    sigma, sigma0, lower, lower0 = _pair_factors(sigma, sigma0)
    log_cov, lower_mid = _log_affinity_cov(sigma, sigma0, lower, lower0)
    mean_term = 0.0
    if data.n > 0:
        M = _mean_shift(beta, beta0, data)
        whitened = scipy.linalg.solve_triangular(lower_mid, M.T, lower=True)
        mean_term = float(np.sum(whitened ** 2)) / 8.0
    cov_term = max(-data.n * log_cov, 0.0)
    return DivergenceBreakdown(cov_term=float(cov_term), mean_term=mean_term)


def row_hellinger_sq(beta, sigma, beta0, sigma0, data):
    '''Squared Hellinger distance int (sqrt f_i - sqrt f0_i)^2 = 2 (1 - affinity), per row.'''
    return 2.0 * (1.0 - np.exp(row_log_affinities(beta, sigma, beta0, sigma0, data)))


def hellinger_sq_cov(sigma, sigma0):
    '''1 - det(Sigma)^1/4 det(Sigma0)^1/4 / det((Sigma + Sigma0)/2)^1/2, in [0, 1].'''
    sigma, sigma0, lower, lower0 = _pair_factors(sigma, sigma0)
    log_cov, _ = _log_affinity_cov(sigma, sigma0, lower, lower0)
    return float(min(max(-np.expm1(log_cov), 0.0), 1.0))
