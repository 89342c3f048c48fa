# -*- coding: utf-8 -*-
"""
Synthetic instances and file I/O.

File layout of a data directory:

    X.csv        n x p design, headerless
    Y.csv        n x d responses, headerless
    groups.txt   group sizes p_1 ... p_G, one per line
    beta0.csv    p x d true coefficients (synthetic data only)
    sigma0.csv   d x d true covariance (synthetic data only)

Values are written with 17 significant digits and read back with pandas'
round-trip float parser, so a write/read cycle is lossless.
"""
import json
import logging
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.covariance import empirical_covariance

from src.domain_types import CoefficientMatrix, Dataset, GroupStructure, HyperParams, all_pairs
from src.math_utilities import total_l21_norm
from src.priors import sample_haar_orthogonal

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'
DATA_FILES = dict(X='X.csv', Y='Y.csv', groups='groups.txt', beta0='beta0.csv', sigma0='sigma0.csv')


@dataclass(frozen=True)
class SyntheticInstance:
    """Data plus the truth it was drawn from; in_b0 reports sum_k ||beta_0k||_2,1 <= beta_bar."""
    data: Dataset
    groups: GroupStructure
    beta0: CoefficientMatrix
    sigma0: np.ndarray
    beta_bar: float
    in_b0: bool

    @property
    def support0(self):
        return self.beta0.support


def beta_bar(n, groups, s0, lam):
    """s0 (log G v p_max log n) / max_k lambda_k."""
    sparsity = np.log(groups.G)
    if n >= 1:
        sparsity = max(sparsity, groups.p_max * np.log(n))
    return float(s0 * sparsity / np.max(lam))


def draw_covariance(d, b1, b2, law, rng):
    """Q diag(eigs) Q' with eigs uniform on [b1, b2]; Q Haar, or I for the diagonal law."""
    eigenvalues = rng.uniform(b1, b2, size=d)
    Q = sample_haar_orthogonal(d, rng) if law == 'rotation' else np.eye(d)
    sigma = (Q * eigenvalues) @ Q.T
    return (sigma + sigma.T) / 2


def draw_coefficients(groups, d, s0, signal, rng):
    """s0 (column, group) pairs chosen uniformly, each block signal x a uniform direction."""
    values = np.zeros((groups.p, d))
    if signal > 0 and s0 > 0:
        pairs = all_pairs(d, groups.G)
        for index in rng.choice(len(pairs), size=s0, replace=False):
            k, j = pairs[index]
            direction = rng.standard_normal(groups.group_sizes[j])
            values[groups.columns(j), k] = signal * direction / np.linalg.norm(direction)
    return CoefficientMatrix.from_values(values, groups)


def generate_data(data_spec, rng, X=None, lam=None):
    """
    Draw one synthetic instance.

    Parameters
    ----------
    data_spec : DataSpec
    rng : np.random.Generator
    X : np.ndarray, optional
        design to reuse; otherwise i.i.d. standard normal rows, or the CSV
        named by data_spec.design_path
    lam : np.ndarray, optional
        slab rates for the B_0 membership check; the default rates from X
        otherwise

    Returns
    -------
    SyntheticInstance

    """
    groups = data_spec.groups()
    if X is None:
        if data_spec.design == 'csv':
            X = read_matrix(data_spec.design_path, columns=groups.p)
            if X.shape[0] != data_spec.n:
                raise ValueError(f'{data_spec.design_path}: design has {X.shape[0]} rows, the data section asks for n = {data_spec.n}')
        else:
            X = rng.standard_normal((data_spec.n, groups.p))
    X = np.asarray(X, dtype=float)
    if X.shape != (data_spec.n, groups.p):
        raise ValueError(f'design has shape {X.shape}, expected {(data_spec.n, groups.p)}')

    beta0 = draw_coefficients(groups, data_spec.d, data_spec.s0, data_spec.signal, rng)
    sigma0 = draw_covariance(data_spec.d, data_spec.b1, data_spec.b2, data_spec.sigma_law, rng)
    noise = rng.standard_normal((data_spec.n, data_spec.d)) @ np.linalg.cholesky(sigma0).T
    data = Dataset(X, X @ beta0.values + noise)

    if lam is None:
        lam = HyperParams.default(X, groups, data_spec.d).lam
    bound = beta_bar(data_spec.n, groups, beta0.support.s, lam)
    in_b0 = total_l21_norm(beta0.values, groups) <= bound
    if not in_b0:
        logger.warning('true coefficients fall outside B_0: l2,1 total %.4g > beta_bar %.4g',
                       total_l21_norm(beta0.values, groups), bound)
    return SyntheticInstance(data=data, groups=groups, beta0=beta0, sigma0=sigma0,
                             beta_bar=bound, in_b0=bool(in_b0))


def noise_covariance(instance):
    """Empirical covariance of the true noise rows Y - X beta0."""
    residual = instance.data.Y - instance.data.X @ instance.beta0.values
    return empirical_covariance(residual, assume_centered=True)


def noise_report(instance):
    """Empirical noise covariance and its Frobenius distance to Sigma_0."""
    if instance.data.n == 0:
        return dict(noise_covariance=None, noise_frobenius=None)
    noise = noise_covariance(instance)
    distance = float(np.linalg.norm(noise - instance.sigma0))
    logger.info('empirical noise covariance is %.4g from Sigma_0 in Frobenius norm (n = %d)',
                distance, instance.data.n)
    return dict(noise_covariance=noise, noise_frobenius=distance)


def write_matrix(path, values):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] == 0:
        open(path, 'w').close()
        return
    pd.DataFrame(values).to_csv(path, header=False, index=False, float_format=FLOAT_FORMAT)


def _first_bad_row(frame):
    """Index label of the first row with a non-numeric or missing cell."""
    converted = frame.apply(pd.to_numeric, errors='coerce')
    bad = converted.isna().any(axis=1).to_numpy()
    return frame.index[int(np.argmax(bad))] if bad.any() else None


def read_matrix(path, columns=None):
    """
    Read a headerless numeric CSV.

    An empty file is a matrix with no rows and blank lines are skipped.
    Ragged rows, non-numeric cells and a wrong column count raise
    ValueError naming the file and the 1-based physical line.
    """
    if not os.path.exists(path):
        raise ValueError(f'{path}: no such file')
    if os.path.getsize(path) == 0:
        return np.zeros((0, columns or 0))
    # row label + 1 is the physical line
    try:
        raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, skip_blank_lines=False)
    except pd.errors.ParserError as error:
        raise ValueError(f'{path}: {error}') from error
    except pd.errors.EmptyDataError:
        return np.zeros((0, columns or 0))
    blank = raw.apply(lambda column: column.fillna('').str.strip() == '').all(axis=1)
    raw = raw[~blank]
    if raw.empty:
        return np.zeros((0, columns or 0))
    bad = _first_bad_row(raw)
    if bad is not None:
        raise ValueError(f'{path}, line {bad + 1}: non-numeric or missing value in {list(raw.loc[bad])}')
    if columns is not None and raw.shape[1] != columns:
        raise ValueError(f'{path}, line {raw.index[0] + 1}: expected {columns} columns, found {raw.shape[1]}')
    frame = pd.read_csv(path, header=None, float_precision='round_trip', skip_blank_lines=True)
    return frame.dropna(how='all').to_numpy(dtype=float)


def write_groups(path, groups):
    pd.Series(groups.group_sizes).to_csv(path, header=False, index=False)


def read_groups(path):
    if not os.path.exists(path):
        raise ValueError(f'{path}: no such file')
    try:
        raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, skip_blank_lines=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as error:
        raise ValueError(f'{path}: {error}') from error
    if raw.shape[1] != 1:
        raise ValueError(f'{path}, line 1: expected one group size per line, found {raw.shape[1]} fields')
    sizes = []
    for number, text in enumerate(raw[0], start=1):
        if pd.isna(text) or not text.strip():
            continue
        try:
            size = int(text.strip())
        except ValueError:
            raise ValueError(f'{path}, line {number}: {text!r} is not a group size') from None
        if size < 1:
            raise ValueError(f'{path}, line {number}: group size must be positive, got {size}')
        sizes.append(size)
    return GroupStructure(tuple(sizes))


def save_instance(directory, data, groups, beta0=None, sigma0=None):
    os.makedirs(directory, exist_ok=True)
    write_matrix(os.path.join(directory, DATA_FILES['X']), data.X)
    write_matrix(os.path.join(directory, DATA_FILES['Y']), data.Y)
    write_groups(os.path.join(directory, DATA_FILES['groups']), groups)
    if beta0 is not None:
        values = beta0.values if isinstance(beta0, CoefficientMatrix) else beta0
        write_matrix(os.path.join(directory, DATA_FILES['beta0']), values)
    if sigma0 is not None:
        write_matrix(os.path.join(directory, DATA_FILES['sigma0']), sigma0)
    logger.info('wrote n=%d, p=%d, d=%d instance to %s', data.n, data.p, data.d, directory)


def load_dataset(x_path, y_path, groups_path):
    """Read X, Y and the groups file; every dimension mismatch is named."""
    groups = read_groups(groups_path)
    X = read_matrix(x_path, columns=groups.p)
    Y = read_matrix(y_path)
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f'{x_path} has {X.shape[0]} rows but {y_path} has {Y.shape[0]}')
    if Y.shape[1] == 0:
        raise ValueError(f'{y_path}: response matrix has no columns')
    return Dataset(X, Y), groups


def load_covariance(path, d):
    sigma = read_matrix(path, columns=d)
    if sigma.shape != (d, d):
        raise ValueError(f'{path}: covariance has shape {sigma.shape}, expected {(d, d)}')
    return sigma


def _to_builtin(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (set, frozenset, tuple)):
        return list(value)
    raise TypeError(f'{type(value).__name__} is not JSON serializable')


def write_json(path, document):
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(document, handle, indent=2, default=_to_builtin)
