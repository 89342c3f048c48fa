# -*- coding: utf-8 -*-
"""
Design-matrix quantities, theoretical rates and recovery/selection summaries.

    restricted_eigenvalue    phi_l2^2(s~): inf ||X beta||_F^2 / (||X||_o^2 ||beta||_F^2)
    compatibility_number     phi_l21^2(s~): inf s_beta ||X beta||_F^2 / (||X||_o^2 (sum_k ||beta_k||_2,1)^2)

Both infima over p x d matrices with s_beta <= s~ are attained by a matrix
with a single nonzero column, so they reduce to minima over group subsets T
of size at most min(s~, G).
"""
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from itertools import combinations
from math import comb, ceil

import numpy as np
from scipy.optimize import minimize

from src.domain_types import CoefficientMatrix, SupportIndex
from src.math_utilities import frobenius_sq, group_operator_norm

logger = logging.getLogger(__name__)

SUBSET_BUDGET = 2 ** 20


@dataclass(frozen=True)
class DesignQuantity:
    '''
    value: the computed minimum. exact: every subset was examined.
    upper_bound: the inner minimization is nonconvex, so value may
    overshoot the true infimum.
    '''
    value: float
    exact: bool
    subsets: int
    upper_bound: bool = False

    def to_dict(self):
        return asdict(self)


def _check_s_tilde(groups, s_tilde, d=None):
    if int(s_tilde) != s_tilde or s_tilde < 1:
        raise ValueError(f's_tilde must be a positive integer, got {s_tilde}')
    if d is not None and s_tilde > groups.G * d:
        raise ValueError(f's_tilde = {s_tilde} exceeds G d = {groups.G * d}')
    return min(int(s_tilde), groups.G)


def _min_eigenvalue(gram, groups, subset):
    index = groups.column_index(subset)
    return max(float(np.linalg.eigvalsh(gram[np.ix_(index, index)])[0]), 0.0)


def _greedy_min(score, G, size, rng, restarts=64, sweeps=20):
    '''Random subsets of the given size improved by single swaps until no swap helps.'''
    best_value, evaluated = np.inf, 0
    for _ in range(restarts):
        subset = sorted(rng.choice(G, size=size, replace=False).tolist())
        value = score(subset)
        evaluated += 1
        for _ in range(sweeps):
            improved = False
            for position in range(size):
                for candidate in range(G):
                    if candidate in subset:
                        continue
                    trial = sorted(subset[:position] + [candidate] + subset[position + 1:])
                    trial_value = score(trial)
                    evaluated += 1
                    if trial_value < value:
                        subset, value, improved = trial, trial_value, True
                        break
            if not improved:
                break
        best_value = min(best_value, value)
    return best_value, evaluated


def restricted_eigenvalue(X, groups, s_tilde, d=None, budget=SUBSET_BUDGET, rng=None):
    '''
    Smallest scaled singular value phi_l2^2(s~).

    Computed as min over group subsets T of size min(s~, G) of
    lambda_min(X_T' X_T) / ||X||_o^2 (smaller subsets are covered by
    eigenvalue interlacing). Past the subset budget, random restarts with
    greedy swap descent give an approximate value flagged exact=False.

    Parameters
    ----------
    X : np.ndarray
        n x p design
    groups : GroupStructure
    s_tilde : int
        dimension, 1 <= s~ <= G d
    d : int, optional
        number of responses; checks s~ <= G d when given
    budget : int
        largest number of subsets enumerated exactly
    rng : np.random.Generator, optional
        used only by the approximate search

    Returns
    -------
    DesignQuantity

    '''
    X = np.asarray(X, dtype=float)
    size = _check_s_tilde(groups, s_tilde, d)
    norm_sq = group_operator_norm(X, groups) ** 2
    if norm_sq == 0:
        return DesignQuantity(0.0, True, 0)
    gram = X.T @ X
    count = comb(groups.G, size)
    if count <= budget:
        value = min(_min_eigenvalue(gram, groups, subset)
                    for subset in combinations(range(groups.G), size))
        return DesignQuantity(value / norm_sq, True, count)
    rng = rng or np.random.default_rng(0)
    logger.info('restricted eigenvalue: %d subsets exceed the budget %d, using greedy search', count, budget)
    value, evaluated = _greedy_min(lambda subset: _min_eigenvalue(gram, groups, subset), groups.G, size, rng)
    return DesignQuantity(value / norm_sq, False, evaluated)


def _block_l21(b, sizes):
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    return np.sqrt(np.add.reduceat(b ** 2, offsets[:-1]))


def _compatibility_on_subset(gram_T, sizes, rng, restarts):
    '''min over b with all blocks nonzero of t b'A b / (sum_j ||b_j||)^2, t = number of blocks.'''
    t = len(sizes)
    eigenvalues, vectors = np.linalg.eigh(gram_T)
    floor = max(float(eigenvalues[0]), 0.0)
    if floor == 0.0 or t == 1:
        # one block: ||b||_2,1 = ||b||, the minimum is lambda_min itself
        return floor
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    block_of = np.repeat(np.arange(t), sizes)

    def objective(b):
        norms = _block_l21(b, sizes)
        total = norms.sum()
        Ab = gram_T @ b
        quadratic = float(b @ Ab)
        value = t * quadratic / total ** 2
        safe = np.where(norms > 0, norms, 1.0)
        direction = np.where(norms[block_of] > 0, b / safe[block_of], 0.0)
        gradient = t * (2 * Ab / total ** 2 - 2 * quadratic * direction / total ** 3)
        return value, gradient

    starts = [vectors[:, 0]] + [rng.standard_normal(offsets[-1]) for _ in range(restarts)]
    best = np.inf
    for start in starts:
        if np.any(_block_l21(start, sizes) == 0):
            start = start + 1e-3 * rng.standard_normal(start.shape)
        result = minimize(objective, start, jac=True, method='L-BFGS-B')
        best = min(best, float(result.fun), objective(start)[0])
    return max(best, floor)


def compatibility_number(X, groups, s_tilde, d=None, budget=SUBSET_BUDGET, rng=None, restarts=8):
    '''
    l2,1-compatibility number phi_l21^2(s~), an upper bound on the infimum.

    Every group subset T with |T| <= min(s~, G) is searched with multistart
    L-BFGS from the smallest eigenvector of X_T' X_T and random points. The
    per-subset value never falls below lambda_min(X_T' X_T), so the result is
    at least restricted_eigenvalue(X, groups, s~).
    '''
    X = np.asarray(X, dtype=float)
    size = _check_s_tilde(groups, s_tilde, d)
    rng = rng or np.random.default_rng(0)
    norm_sq = group_operator_norm(X, groups) ** 2
    if norm_sq == 0:
        return DesignQuantity(0.0, True, 0, upper_bound=True)
    gram = X.T @ X
    sizes = np.asarray(groups.group_sizes)

    def score(subset):
        index = groups.column_index(subset)
        return _compatibility_on_subset(gram[np.ix_(index, index)], sizes[sorted(subset)], rng, restarts)

    count = sum(comb(groups.G, t) for t in range(1, size + 1))
    if count <= budget:
        value = min(score(list(subset)) for t in range(1, size + 1)
                    for subset in combinations(range(groups.G), t))
        return DesignQuantity(value / norm_sq, True, count, upper_bound=True)
    logger.info('compatibility number: %d subsets exceed the budget %d, using greedy search', count, budget)
    value, evaluated = np.inf, 0
    for t in range(1, size + 1):
        found, examined = _greedy_min(score, groups.G, t, rng, restarts=8, sweeps=5)
        value, evaluated = min(value, found), evaluated + examined
    return DesignQuantity(value / norm_sq, False, evaluated, upper_bound=True)


@dataclass(frozen=True)
class RateConstants:
    M1: float = 1.0
    M2: float = 1.0
    M3: float = 1.0
    M4: float = 1.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value <= 0:
                raise ValueError(f'{name} must be positive, got {value}')


@dataclass(frozen=True)
class RateSummary:
    '''
    Rate quantities for one configuration.

    eps_n, s_star          contraction rate and dimension threshold
    eps_n_iw, s_star_iw    the same under the inverse-Wishart prior (d^3 in place of d^2)
    beta_min_threshold     lower bound on every squared active block norm
    beta_bar               upper bound on sum_k ||beta_0k||_2,1
    prediction_threshold   M1 n eps_n^2
    l21_threshold          recovery threshold for (sum_k ||beta_k - beta_0k||_2,1)^2
    delta_n                remainder sequence of the mixture approximation
    small_lambda_index     max_k lambda_k eps_n sqrt(s* n) / ||X||_o
    '''
    eps_n: float
    s_star: float
    beta_min_threshold: float
    beta_bar: float
    eps_n_iw: float
    s_star_iw: float
    prediction_threshold: float
    l21_threshold: float
    delta_n: float
    small_lambda_index: float
    inputs: dict = field(default_factory=dict)

    @property
    def s_tilde(self):
        '''s0 + M2 s*, rounded up and capped at G d: the dimension used for phi.'''
        inputs = self.inputs
        return min(max(1, ceil(inputs['s0'] + inputs['M2'] * self.s_star)), inputs['G'] * inputs['d'])

    def to_dict(self):
        return asdict(self)


def dimension_threshold(n, G, d, p_max, s0, power=2):
    '''s* = s0 v d^power log n / (log G v p_max log n); power 3 under the inverse-Wishart prior.'''
    return float(max(s0, d ** power * np.log(n) / max(np.log(G), p_max * np.log(n))))


def theoretical_rates(n, G, d, p_max, s0, constants=None, x_norm=1.0, phi_l2=1.0,
                      phi_l21=None, lam_max=None):
    '''
    Parameters
    ----------
    n, G, d, p_max, s0 : int
        sample size, groups, responses, largest group and true dimension
    constants : RateConstants, optional
        M1..M4, all 1 by default
    x_norm : float
        ||X||_o
    phi_l2, phi_l21 : float
        phi_l2(s0 + M2 s*) and phi_l21(s0 + M2 s*), not squared;
        phi_l21 defaults to phi_l2
    lam_max : float, optional
        largest slab rate; by default ||X||_o / (G^(1/p_max) v n)

    Returns
    -------
    RateSummary

    '''
    constants = constants or RateConstants()
    if n < 2 or G < 1 or d < 1 or p_max < 1 or s0 < 0:
        raise ValueError(f'need n >= 2, G, d, p_max >= 1 and s0 >= 0; got {(n, G, d, p_max, s0)}')
    if x_norm <= 0 or phi_l2 <= 0:
        raise ValueError(f'||X||_o and phi_l2 must be positive, got {x_norm}, {phi_l2}')
    phi_l21 = phi_l2 if phi_l21 is None else phi_l21
    if lam_max is None:
        lam_max = x_norm / max(G ** (1.0 / p_max), n)
    log_G, log_n_pmax = np.log(G), p_max * np.log(n)
    log_n = np.log(n)
    sparsity = max(log_G, log_n_pmax)

    def rate(power):
        return float(max(np.sqrt(s0 * log_G / n), np.sqrt(s0 * log_n_pmax / n),
                         np.sqrt(d ** power * log_n / n)))

    eps_n, eps_n_iw = rate(2), rate(3)
    s_star = dimension_threshold(n, G, d, p_max, s0)
    s_star_iw = dimension_threshold(n, G, d, p_max, s0, power=3)
    n_eps_sq = n * eps_n ** 2
    root = np.sqrt(s_star * n)
    delta_n = eps_n * root * max(lam_max / x_norm, eps_n ** 2 * root, eps_n * np.sqrt(p_max * d ** 3 * log_G))
    return RateSummary(
        eps_n=eps_n,
        s_star=s_star,
        beta_min_threshold=float(constants.M3 * n_eps_sq / (x_norm ** 2 * phi_l2 ** 2)),
        beta_bar=float(s0 * sparsity / lam_max),
        eps_n_iw=eps_n_iw,
        s_star_iw=s_star_iw,
        prediction_threshold=float(constants.M1 * n_eps_sq),
        l21_threshold=float(constants.M4 * s_star * n_eps_sq / (x_norm ** 2 * phi_l21 ** 2)),
        delta_n=float(delta_n),
        small_lambda_index=float(lam_max * eps_n * root / x_norm),
        inputs=dict(n=n, G=G, d=d, p_max=p_max, s0=s0, x_norm=float(x_norm), phi_l2=float(phi_l2),
                    phi_l21=float(phi_l21), lam_max=float(lam_max), **asdict(constants)),
        )


def design_rates(X, groups, d, s0, constants=None, lam_max=None, compatibility=False,
                 budget=SUBSET_BUDGET):
    '''
    theoretical_rates with ||X||_o and phi at s0 + M2 s* computed from X.

    phi_l21 is searched only with compatibility=True; otherwise phi_l2 stands
    in for it, which can only enlarge the l2,1 threshold.
    '''
    constants = constants or RateConstants()
    n = X.shape[0]
    x_norm = group_operator_norm(X, groups)
    s_star = dimension_threshold(n, groups.G, d, groups.p_max, s0)
    s_tilde = min(max(1, ceil(s0 + constants.M2 * s_star)), groups.G * d)
    phi_l2 = restricted_eigenvalue(X, groups, s_tilde, budget=budget)
    if phi_l2.value <= 0:
        raise ValueError(f'restricted eigenvalue at s~ = {s_tilde} is 0; the rates are undefined')
    phi_l21 = phi_l2
    if compatibility:
        phi_l21 = compatibility_number(X, groups, s_tilde, budget=budget)
    return theoretical_rates(n, groups.G, d, groups.p_max, s0, constants, x_norm=x_norm,
                             phi_l2=np.sqrt(phi_l2.value), phi_l21=np.sqrt(phi_l21.value),
                             lam_max=lam_max)


def _values(beta):
    if isinstance(beta, CoefficientMatrix):
        return beta.values
    return np.atleast_2d(np.asarray(beta, dtype=float))


@dataclass(frozen=True)
class RecoveryReport:
    prediction: float
    frobenius: float
    l21: float

    def to_dict(self):
        return asdict(self)


def recovery_report(beta, beta0, X, groups):
    '''
    Losses of beta against beta0: ||X (beta - beta0)||_F^2,
    ||beta - beta0||_F^2 and (sum_k ||beta_k - beta_0k||_2,1)^2.
    '''
    difference = _values(beta) - _values(beta0)
    X = np.asarray(X, dtype=float)
    if difference.shape[0] != X.shape[1]:
        raise ValueError(f'coefficients have {difference.shape[0]} rows, the design {X.shape[1]} columns')
    return RecoveryReport(
        prediction=frobenius_sq(X @ difference),
        frobenius=frobenius_sq(difference),
        l21=float(groups.block_norms(difference).sum()) ** 2,
        )


@dataclass(frozen=True)
class SelectionReport:
    exact_match: bool
    missed: int
    false: int
    missed_pairs: tuple
    false_pairs: tuple

    def to_dict(self):
        return dict(exact_match=self.exact_match, missed=self.missed, false=self.false,
                    missed_pairs=[list(pair) for pair in self.missed_pairs],
                    false_pairs=[list(pair) for pair in self.false_pairs])


def _as_support(value):
    if isinstance(value, CoefficientMatrix):
        return value.support
    if isinstance(value, SupportIndex):
        return value
    raise TypeError(f'expected a SupportIndex or CoefficientMatrix, got {type(value).__name__}')


def selection_report(support, support0):
    '''Missed and false (column, group) pairs of a support against the true one.'''
    support, support0 = _as_support(support), _as_support(support0)
    found, truth = set(support.pairs()), set(support0.pairs())
    missed, false = sorted(truth - found), sorted(found - truth)
    return SelectionReport(exact_match=found == truth, missed=len(missed), false=len(false),
                           missed_pairs=tuple(missed), false_pairs=tuple(false))


def _sizes(chain):
    sizes = []
    for item in chain:
        if hasattr(item, 'support'):
            sizes.append(item.support.s)
        elif isinstance(item, SupportIndex):
            sizes.append(item.s)
        else:
            sizes.append(int(item))
    return sizes


def effective_dimension(chain):
    '''Posterior histogram {s: frequency} of the support size over chain samples.'''
    sizes = _sizes(chain)
    if not sizes:
        raise ValueError('no chain samples')
    counts = Counter(sizes)
    return {s: counts[s] / len(sizes) for s in sorted(counts)}


def modal_support(chain):
    '''Most visited support key and its frequency; ties go to the first visited.'''
    keys = [item.support.key() for item in chain]
    if not keys:
        raise ValueError('no chain samples')
    key, count = Counter(keys).most_common(1)[0]
    return key, count / len(keys)


def covariance_loss(sigma, sigma0):
    '''||Sigma - Sigma0||_F^2.'''
    sigma, sigma0 = np.atleast_2d(sigma), np.atleast_2d(sigma0)
    if sigma.shape != sigma0.shape:
        raise ValueError(f'covariances have shapes {sigma.shape} and {sigma0.shape}')
    return frobenius_sq(sigma - sigma0)
