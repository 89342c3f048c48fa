# -*- coding: utf-8 -*-
"""
Domain types shared by every module: the group partition of the predictors,
the data container, supports, coefficient matrices, the eigen-factored
covariance and the prior hyperparameters.

All types are frozen; array fields are stored read-only so that instances
can be shared between workers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import chain
from typing import Iterable, Optional, Sequence

import numpy as np


ORTHOGONALITY_TOL = 1e-10


def _frozen_array(values, name, ndim):
    array = np.array(values, dtype=float, copy=True)
    if array.ndim != ndim:
        raise ValueError(f'{name} must be {ndim}-dimensional, got shape {array.shape}')
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class GroupStructure:
    '''
    Partition of the p predictor columns into G disjoint consecutive groups.

    Group order follows the column order of the design matrix; group j owns
    columns offsets[j]:offsets[j + 1].
    '''
    group_sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(size) for size in self.group_sizes)
        if len(sizes) == 0:
            raise ValueError('a group structure needs at least one group')
        if any(size < 1 for size in sizes):
            raise ValueError(f'group sizes must be positive, got {sizes}')
        object.__setattr__(self, 'group_sizes', sizes)

    @classmethod
    def equal(cls, n_groups: int, size: int) -> 'GroupStructure':
        return cls(tuple([size] * n_groups))

    @property
    def G(self) -> int:
        return len(self.group_sizes)

    @property
    def p(self) -> int:
        return sum(self.group_sizes)

    @property
    def p_max(self) -> int:
        return max(self.group_sizes)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.group_sizes)]).astype(int)

    def columns(self, j: int) -> slice:
        offsets = self.offsets
        return slice(int(offsets[j]), int(offsets[j + 1]))

    def column_index(self, groups: Iterable[int]) -> np.ndarray:
        '''Predictor columns covered by the given groups, in group order.'''
        offsets = self.offsets
        pieces = [np.arange(offsets[j], offsets[j + 1]) for j in sorted(groups)]
        if not pieces:
            return np.zeros(0, dtype=int)
        return np.concatenate(pieces)

    def block_norms(self, values: np.ndarray) -> np.ndarray:
        '''
        Euclidean norm of every (group, column) block.

        Parameters
        ----------
        values : np.ndarray
            p x d matrix (or length-p vector, treated as d = 1).

        Returns
        -------
        np.ndarray
            G x d array of block norms.
        '''
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != self.p:
            raise ValueError(
                f'expected {self.p} rows for this group structure, got {values.shape[0]}')
        offsets = self.offsets
        squares = np.add.reduceat(values ** 2, offsets[:-1], axis=0)
        return np.sqrt(squares)


@dataclass(frozen=True)
class Dataset:
    '''Design matrix X (n x p) and response matrix Y (n x d).'''
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = _frozen_array(self.X, 'X', 2)
        Y = _frozen_array(self.Y, 'Y', 2)
        if X.shape[0] != Y.shape[0]:
            raise ValueError(
                f'X has {X.shape[0]} rows but Y has {Y.shape[0]}')
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError('X and Y must contain only finite values')
        object.__setattr__(self, 'X', X)
        object.__setattr__(self, 'Y', Y)

    @classmethod
    def empty(cls, p: int, d: int) -> 'Dataset':
        # zero rows: every likelihood term vanishes, used for prior-only runs
        return cls(np.zeros((0, p)), np.zeros((0, d)))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def d(self) -> int:
        return self.Y.shape[1]

    def check_groups(self, groups: GroupStructure):
        if groups.p != self.p:
            raise ValueError(
                f'design has {self.p} columns but the groups cover {groups.p}')


@dataclass(frozen=True)
class SupportIndex:
    '''
    The d-tuple of active group sets, one set per response column.

    Active entries are addressed as (column k, group j) pairs, both 0-based.
    '''
    sets: tuple
    n_groups: int

    def __post_init__(self):
        sets = tuple(frozenset(int(j) for j in active) for active in self.sets)
        for k, active in enumerate(sets):
            if any(j < 0 or j >= self.n_groups for j in active):
                raise ValueError(
                    f'column {k} lists groups outside 0..{self.n_groups - 1}: {sorted(active)}')
        object.__setattr__(self, 'sets', sets)

    @classmethod
    def empty(cls, d: int, n_groups: int) -> 'SupportIndex':
        return cls(tuple(frozenset() for _ in range(d)), n_groups)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[int]], d: int, n_groups: int) -> 'SupportIndex':
        sets = [set() for _ in range(d)]
        for k, j in pairs:
            if k < 0 or k >= d:
                raise ValueError(f'response column {k} outside 0..{d - 1}')
            if j in sets[k]:
                raise ValueError(f'pair ({k}, {j}) listed twice')
            sets[k].add(j)
        return cls(tuple(sets), n_groups)

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> 'SupportIndex':
        '''Build from a G x d boolean activity mask.'''
        mask = np.asarray(mask, dtype=bool)
        sets = tuple(frozenset(np.flatnonzero(mask[:, k]).tolist()) for k in range(mask.shape[1]))
        return cls(sets, mask.shape[0])

    @property
    def d(self) -> int:
        return len(self.sets)

    @property
    def s(self) -> int:
        return sum(len(active) for active in self.sets)

    @property
    def size_per_column(self) -> tuple:
        return tuple(len(active) for active in self.sets)

    def pairs(self) -> list:
        '''Active (column, group) pairs in column-major then group order.'''
        return [(k, j) for k, active in enumerate(self.sets) for j in sorted(active)]

    def inactive_pairs(self) -> list:
        return [(k, j) for k in range(self.d) for j in range(self.n_groups)
                if j not in self.sets[k]]

    def contains(self, k: int, j: int) -> bool:
        return j in self.sets[k]

    def with_pair(self, k: int, j: int) -> 'SupportIndex':
        if self.contains(k, j):
            raise ValueError(f'pair ({k}, {j}) is already active')
        sets = list(self.sets)
        sets[k] = sets[k] | {j}
        return SupportIndex(tuple(sets), self.n_groups)

    def without_pair(self, k: int, j: int) -> 'SupportIndex':
        if not self.contains(k, j):
            raise ValueError(f'pair ({k}, {j}) is not active')
        sets = list(self.sets)
        sets[k] = sets[k] - {j}
        return SupportIndex(tuple(sets), self.n_groups)

    def mask(self) -> np.ndarray:
        mask = np.zeros((self.n_groups, self.d), dtype=bool)
        for k, j in self.pairs():
            mask[j, k] = True
        return mask

    def p_S(self, groups: GroupStructure) -> int:
        if groups.G != self.n_groups:
            raise ValueError(
                f'support indexes {self.n_groups} groups but the structure has {groups.G}')
        return sum(groups.group_sizes[j] for _, j in self.pairs())

    def active_sizes(self, k: int, groups: GroupStructure) -> list:
        return [groups.group_sizes[j] for j in sorted(self.sets[k])]

    def key(self) -> tuple:
        '''Hashable, sortable label used for visit counts and exports.'''
        return tuple(tuple(sorted(active)) for active in self.sets)


@dataclass(frozen=True)
class CoefficientMatrix:
    '''
    Dense p x d coefficients with an explicit group-level support.

    Entries outside the support are exactly zero and every supported block
    carries at least one nonzero entry, so the support equals S_beta.
    '''
    values: np.ndarray
    support: SupportIndex
    groups: GroupStructure

    def __post_init__(self):
        values = _frozen_array(self.values, 'coefficients', 2)
        if values.shape != (self.groups.p, self.support.d):
            raise ValueError(
                f'coefficients have shape {values.shape}, expected '
                f'{(self.groups.p, self.support.d)}')
        observed = self.groups.block_norms(values) > 0
        if not np.array_equal(observed, self.support.mask()):
            raise ValueError('coefficient values disagree with the stated support')
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_values(cls, values: np.ndarray, groups: GroupStructure) -> 'CoefficientMatrix':
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        support = SupportIndex.from_mask(groups.block_norms(values) > 0)
        return cls(values, support, groups)

    @classmethod
    def zeros(cls, groups: GroupStructure, d: int) -> 'CoefficientMatrix':
        return cls(np.zeros((groups.p, d)), SupportIndex.empty(d, groups.G), groups)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def block(self, k: int, j: int) -> np.ndarray:
        return self.values[self.groups.columns(j), k]

    def active_vector(self) -> np.ndarray:
        '''Active coefficients stacked column by column, groups in order.'''
        pieces = [self.block(k, j) for k, j in self.support.pairs()]
        if not pieces:
            return np.zeros(0)
        return np.concatenate(pieces)

    def with_active_vector(self, theta: np.ndarray) -> 'CoefficientMatrix':
        '''Replace the active coefficients, keeping the support.'''
        values = np.zeros_like(self.values)
        position = 0
        for k, j in self.support.pairs():
            size = self.groups.group_sizes[j]
            values[self.groups.columns(j), k] = theta[position:position + size]
            position += size
        if position != len(theta):
            raise ValueError(f'expected {position} active coefficients, got {len(theta)}')
        return CoefficientMatrix(values, self.support, self.groups)

    def with_block(self, k: int, j: int, block: np.ndarray) -> 'CoefficientMatrix':
        '''Activate (k, j) with the given block (or overwrite it when active).'''
        values = np.array(self.values)
        values[self.groups.columns(j), k] = block
        support = self.support if self.support.contains(k, j) else self.support.with_pair(k, j)
        return CoefficientMatrix(values, support, self.groups)

    def without_block(self, k: int, j: int) -> 'CoefficientMatrix':
        values = np.array(self.values)
        values[self.groups.columns(j), k] = 0.0
        return CoefficientMatrix(values, self.support.without_pair(k, j), self.groups)


@dataclass(frozen=True)
class CovarianceEigen:
    '''Covariance stored as Sigma = P diag(D) P' with P orthogonal, D > 0.'''
    P: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        P = _frozen_array(self.P, 'P', 2)
        D = _frozen_array(self.D, 'D', 1)
        d = D.shape[0]
        if P.shape != (d, d):
            raise ValueError(f'P has shape {P.shape}, expected {(d, d)}')
        if np.any(D <= 0) or not np.all(np.isfinite(D)):
            raise ValueError(f'eigenvalues must be positive and finite, got {D}')
        if np.linalg.norm(P.T @ P - np.eye(d)) > ORTHOGONALITY_TOL:
            raise ValueError('P is not orthogonal to within 1e-10')
        object.__setattr__(self, 'P', P)
        object.__setattr__(self, 'D', D)

    @classmethod
    def from_matrix(cls, sigma: np.ndarray) -> 'CovarianceEigen':
        '''Factor an SPD matrix; eigenvalues are stored in descending order.'''
        sigma = np.asarray(sigma, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValueError(f'covariance must be square, got shape {sigma.shape}')
        if not np.allclose(sigma, sigma.T, rtol=1e-10, atol=1e-12):
            raise ValueError('covariance is not symmetric')
        eigenvalues, vectors = np.linalg.eigh((sigma + sigma.T) / 2)
        if np.any(eigenvalues <= 0):
            raise ValueError('covariance is not symmetric positive definite')
        order = np.argsort(eigenvalues)[::-1]
        return cls(vectors[:, order], eigenvalues[order])

    @classmethod
    def identity(cls, d: int) -> 'CovarianceEigen':
        return cls(np.eye(d), np.ones(d))

    @property
    def d(self) -> int:
        return self.D.shape[0]

    def reconstruct(self) -> np.ndarray:
        sigma = (self.P * self.D) @ self.P.T
        return (sigma + sigma.T) / 2

    def precision(self) -> np.ndarray:
        precision = (self.P / self.D) @ self.P.T
        return (precision + precision.T) / 2

    def log_det(self) -> float:
        return float(np.sum(np.log(self.D)))

    def sorted_descending(self) -> 'CovarianceEigen':
        order = np.argsort(self.D)[::-1]
        return CovarianceEigen(self.P[:, order], self.D[order])


@dataclass(frozen=True)
class HyperParams:
    '''
    Prior hyperparameters.

    lam holds one slab rate per response column. wishart_dof/wishart_scale
    are only used by the conjugate inverse-Wishart variant.
    '''
    lam: np.ndarray
    dim_exponent: float = 1.0
    ig_mean: float = 1.0
    ig_shape: float = 1.0
    wishart_dof: Optional[float] = None
    wishart_scale: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        lam = _frozen_array(np.atleast_1d(self.lam), 'lam', 1)
        if np.any(lam <= 0):
            raise ValueError(f'slab rates must be positive, got {lam}')
        object.__setattr__(self, 'lam', lam)
        for name in ('dim_exponent', 'ig_mean', 'ig_shape'):
            if getattr(self, name) <= 0:
                raise ValueError(f'{name} must be positive, got {getattr(self, name)}')
        d = lam.shape[0]
        if self.wishart_scale is not None:
            scale = _frozen_array(self.wishart_scale, 'wishart_scale', 2)
            if scale.shape != (d, d):
                raise ValueError(f'wishart_scale has shape {scale.shape}, expected {(d, d)}')
            if not np.allclose(scale, scale.T) or np.any(np.linalg.eigvalsh(scale) <= 0):
                raise ValueError('wishart_scale is not symmetric positive definite')
            object.__setattr__(self, 'wishart_scale', scale)
        if self.wishart_dof is not None and self.wishart_dof <= d - 1:
            raise ValueError(f'wishart_dof must exceed d - 1 = {d - 1}, got {self.wishart_dof}')

    @property
    def d(self) -> int:
        return self.lam.shape[0]

    @classmethod
    def default(cls, X: np.ndarray, groups: GroupStructure, d: int, **overrides) -> 'HyperParams':
        '''
        Defaults: every lambda_k at the lower end of its admissible range,
        ||X||_o / (G^(1/p_max) v n); unit inverse-Gaussian parameters;
        inverse-Wishart nu = max(d^2, d) and Phi = I_d.
        '''
        from src.math_utilities import group_operator_norm

        n = X.shape[0]
        norm = group_operator_norm(X, groups) if n > 0 else 0.0
        if norm > 0:
            rate = norm / max(groups.G ** (1.0 / groups.p_max), n)
        else:
            rate = 1.0
        values = dict(
            lam=np.full(d, rate),
            wishart_dof=float(max(d * d, d)),
            wishart_scale=np.eye(d),
            )
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    def with_lam(self, lam) -> 'HyperParams':
        return HyperParams(
            lam=np.broadcast_to(np.asarray(lam, dtype=float), (self.d,)),
            dim_exponent=self.dim_exponent,
            ig_mean=self.ig_mean,
            ig_shape=self.ig_shape,
            wishart_dof=self.wishart_dof,
            wishart_scale=self.wishart_scale,
            )


def all_pairs(d: int, n_groups: int) -> list:
    '''Every (column, group) pair in column-major order.'''
    return list(chain.from_iterable(((k, j) for j in range(n_groups)) for k in range(d)))
