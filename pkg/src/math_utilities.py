# -*- coding: utf-8 -*-
"""
Math utilities shared by the priors, likelihood and metrics modules:
group-structured norms, vectorization of the coefficient matrix and a few
numerically careful helpers (Cholesky with a readable failure, log
binomials).
"""
import numpy as np
import scipy.linalg
from scipy.special import gammaln

from src.domain_types import CoefficientMatrix, GroupStructure


def _check_columns(X, groups):
    if X.ndim != 2 or X.shape[1] != groups.p:
        raise ValueError(
            f'design has shape {X.shape}, expected {groups.p} columns')


def group_operator_norm(X, groups):
    '''
    Largest spectral norm over the group submatrices of X.

    Parameters
    ----------
    X : np.ndarray
        n x p design matrix
    groups : GroupStructure
        partition of the p columns

    Returns
    -------
    float
        max_j ||X_j||, with X_j the n x p_j submatrix of group j.

    '''
    X = np.asarray(X, dtype=float)
    _check_columns(X, groups)
    if X.shape[0] == 0:
        return 0.0
    return max(
        float(np.linalg.norm(X[:, groups.columns(j)], 2)) for j in range(groups.G)
        )


def l21_norm(v, groups):
    '''
    Sum over groups of the Euclidean norm of each block of v.

    Parameters
    ----------
    v : np.ndarray
        length-p vector
    groups : GroupStructure

    Returns
    -------
    float

    '''
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != groups.p:
        raise ValueError(f'vector has shape {v.shape}, expected ({groups.p},)')
    return float(groups.block_norms(v).sum())


def total_l21_norm(values, groups):
    '''Sum over response columns of the l2,1 norm of each column.'''
    return float(groups.block_norms(values).sum())


def vectorize(beta):
    '''Vec(beta): the columns of the p x d matrix stacked into one pd vector.'''
    values = beta.values if isinstance(beta, CoefficientMatrix) else np.asarray(beta, dtype=float)
    return values.ravel(order='F')


def design_block(x_row, d):
    '''
    The pd x d block I_d (x) X_i' so that Vec(beta) . block = X_i beta.

    Parameters
    ----------
    x_row : np.ndarray
        one row X_i of the design, length p
    d : int
        number of responses

    '''
    x_row = np.asarray(x_row, dtype=float)
    if x_row.ndim != 1:
        raise ValueError(f'design row must be 1-dimensional, got shape {x_row.shape}')
    return np.kron(np.eye(d), x_row[:, None])


def cholesky_lower(matrix, name='matrix'):
    '''Lower Cholesky factor; a failed factorization means matrix is not SPD.'''
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f'{name} must be square, got shape {matrix.shape}')
    if not np.allclose(matrix, matrix.T, rtol=1e-8, atol=1e-12):
        raise ValueError(f'{name} is not symmetric')
    try:
        return scipy.linalg.cholesky(matrix, lower=True)
    except np.linalg.LinAlgError as error:
        raise ValueError(f'{name} is not symmetric positive definite') from error


def log_det_from_cholesky(lower):
    return 2.0 * float(np.sum(np.log(np.diag(lower))))


def log_binomial(n, k):
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def nearest_orthogonal(P):
    '''Polar projection back onto the orthogonal group (removes round-off drift).'''
    u, _, vt = np.linalg.svd(P)
    return u @ vt


def frobenius_sq(A):
    return float(np.sum(np.asarray(A) ** 2))
