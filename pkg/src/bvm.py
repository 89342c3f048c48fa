# -*- coding: utf-8 -*-
"""
Gaussian-mixture approximation of the posterior at a known covariance Sigma0.

Every support S with s <= s_cap contributes one component: a normal law
centred at the restricted generalized-least-squares fit on S, with
precision Gamma_S = sum_i X_S,i Sigma0^-1 X_S,i'. The mixture weights
combine the support prior, the slab normalization at the fit and the
Laplace volume det(Gamma_S)^-1/2.
"""
import json
import logging
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np
import scipy.linalg
from joblib import Parallel, delayed
from scipy.special import logsumexp

from src.domain_types import GroupStructure, SupportIndex, all_pairs
from src.math_utilities import cholesky_lower, log_binomial, log_det_from_cholesky
from src.priors import SlabConstantTable, dimension_prior_table

logger = logging.getLogger(__name__)

SUPPORT_LIMIT = 10 ** 6


@dataclass(frozen=True)
class MixtureComponent:
    support: SupportIndex
    log_weight: float
    mean: np.ndarray
    information: np.ndarray
    precision_factor: np.ndarray

    @property
    def dim(self):
        return self.mean.shape[0]


@dataclass(frozen=True)
class MixturePosterior:
    '''
    Normalized mixture; log-weights satisfy logsumexp = 0.

    information holds I_S = Gamma_S / n and precision_factor the lower
    Cholesky factor of n I_S = Gamma_S.
    '''
    components: tuple
    groups: GroupStructure
    d: int
    n: int
    s_cap: int

    def __len__(self):
        return len(self.components)

    @property
    def log_weights(self):
        return np.array([component.log_weight for component in self.components])

    @property
    def weights(self):
        return np.exp(self.log_weights)

    def support_weights(self):
        return {component.support.key(): float(np.exp(component.log_weight))
                for component in self.components}

    def top(self):
        return self.components[int(np.argmax(self.log_weights))]

    def find(self, support):
        key = support.key() if isinstance(support, SupportIndex) else support
        for component in self.components:
            if component.support.key() == key:
                return component
        return None


def _precision(sigma0):
    sigma0 = np.atleast_2d(np.asarray(sigma0, dtype=float))
    lower = cholesky_lower(sigma0, 'Sigma0')
    precision = scipy.linalg.cho_solve((lower, True), np.eye(sigma0.shape[0]))
    return (precision + precision.T) / 2


def active_rows(support, groups):
    '''(row, column) coordinates of the active coefficients, in stacking order.'''
    rows, cols = [], []
    for k, j in support.pairs():
        block = np.arange(groups.columns(j).start, groups.columns(j).stop)
        rows.append(block)
        cols.append(np.full(len(block), k))
    if not rows:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    return np.concatenate(rows), np.concatenate(cols)


def information_system(support, data, groups, precision):
    '''Gamma_S (block (k, l) = Omega_kl X_Sk' X_Sl) and the matching GLS right-hand side.'''
    rows, cols = active_rows(support, groups)
    gram = data.X.T @ data.X
    gamma = precision[np.ix_(cols, cols)] * gram[np.ix_(rows, rows)]
    weighted = data.X.T @ (data.Y @ precision)
    return gamma, weighted[rows, cols]


def _restricted_fit(support, data, groups, precision):
    p_S = support.p_S(groups)
    if p_S > data.n:
        raise ValueError(f'support has p_S = {p_S} active coefficients but only n = {data.n} rows')
    if p_S == 0:
        empty = np.zeros((0, 0))
        return np.zeros(0), empty, empty
    gamma, rhs = information_system(support, data, groups, precision)
    try:
        lower = scipy.linalg.cholesky(gamma, lower=True)
    except np.linalg.LinAlgError as error:
        raise ValueError(f'information matrix for support {support.key()} is singular') from error
    beta_hat = scipy.linalg.cho_solve((lower, True), rhs)
    return beta_hat, gamma, lower


def restricted_mle(support, data, groups, sigma0):
    '''
    Generalized least squares restricted to the support.

    Parameters
    ----------
    support : SupportIndex
    data : Dataset
    groups : GroupStructure
    sigma0 : np.ndarray
        known d x d noise covariance

    Returns
    -------
    beta_hat : np.ndarray
        active coefficients stacked in SupportIndex.pairs() order
    information : np.ndarray
        I_S = Gamma_S / n

    '''
    data.check_groups(groups)
    beta_hat, gamma, _ = _restricted_fit(support, data, groups, _precision(sigma0))
    return beta_hat, gamma / max(data.n, 1)


def enumerate_supports(G, d, s_cap, limit=SUPPORT_LIMIT):
    '''Every support with s <= s_cap, by increasing size; RuntimeError past limit.'''
    s_cap = min(int(s_cap), G * d)
    if s_cap < 0:
        raise ValueError(f's_cap must be nonnegative, got {s_cap}')
    count = sum(comb(G * d, s) for s in range(s_cap + 1))
    if count > limit:
        raise RuntimeError(
            f'{count} supports with s <= {s_cap} exceed the enumeration limit {limit}')
    pairs = all_pairs(d, G)
    supports = []
    for s in range(s_cap + 1):
        for chosen in combinations(pairs, s):
            supports.append(SupportIndex.from_pairs(chosen, d, G))
    return supports


def _component_log_weight(support, data, groups, precision, hp, log_dim_table):
    beta_hat, gamma, lower = _restricted_fit(support, data, groups, precision)
    s = support.s
    constants = SlabConstantTable(groups.p_max)
    log_weight = log_dim_table[s] - log_binomial(groups.G * support.d, s)
    for k, j in support.pairs():
        size = groups.group_sizes[j]
        log_weight += size * (np.log(hp.lam[k] * np.sqrt(2 * np.pi)) - constants.log(size))
    if beta_hat.size:
        log_weight += -0.5 * log_det_from_cholesky(lower) + 0.5 * float(beta_hat @ gamma @ beta_hat)
    return float(log_weight), beta_hat, gamma, lower


def mixture_weights(supports, data, groups, sigma0, hp, s_cap=None, workers=1):
    '''
    Components and normalized weights for the given supports.

    Parameters
    ----------
    supports : sequence of SupportIndex
    data : Dataset
    groups : GroupStructure
    sigma0 : np.ndarray
        known noise covariance
    hp : HyperParams
        slab rates and dimension prior exponent
    s_cap : int, optional
        recorded on the result; the largest support size by default
    workers : int
        joblib workers for the per-support fits

    Returns
    -------
    MixturePosterior

    '''
    data.check_groups(groups)
    supports = list(supports)
    if not supports:
        raise ValueError('a mixture needs at least one support')
    precision = _precision(sigma0)
    log_dim_table = dimension_prior_table(groups.G, data.d, data.n, groups.p_max, hp.dim_exponent)
    if workers == 1:
        fits = [_component_log_weight(support, data, groups, precision, hp, log_dim_table)
                for support in supports]
    else:
        fits = Parallel(n_jobs=workers)(
            delayed(_component_log_weight)(support, data, groups, precision, hp, log_dim_table)
            for support in supports
            )
    raw = np.array([fit[0] for fit in fits])
    normalized = raw - logsumexp(raw)
    n = max(data.n, 1)
    components = tuple(
        MixtureComponent(support=support, log_weight=float(log_weight), mean=beta_hat,
                         information=gamma / n, precision_factor=lower)
        for support, log_weight, (_, beta_hat, gamma, lower) in zip(supports, normalized, fits)
        )
    if s_cap is None:
        s_cap = max(support.s for support in supports)
    return MixturePosterior(components=components, groups=groups, d=data.d, n=data.n, s_cap=int(s_cap))


def build_mixture(data, groups, sigma0, hp, s_cap=None, limit=SUPPORT_LIMIT, workers=1):
    '''Enumerate the supports up to s_cap (all by default), drop p_S > n, and weight them.'''
    s_cap = groups.G * data.d if s_cap is None else min(int(s_cap), groups.G * data.d)
    supports = enumerate_supports(groups.G, data.d, s_cap, limit)
    feasible = [support for support in supports if support.p_S(groups) <= data.n]
    if len(feasible) < len(supports):
        logger.info('dropped %d supports with more active coefficients than rows (n = %d)',
                    len(supports) - len(feasible), data.n)
    logger.info('weighting %d supports (s <= %d)', len(feasible), s_cap)
    return mixture_weights(feasible, data, groups, sigma0, hp, s_cap=s_cap, workers=workers)


@dataclass(frozen=True)
class MixtureDraws:
    values: np.ndarray
    component: np.ndarray
    mixture: MixturePosterior

    def support_keys(self):
        return [self.mixture.components[index].support.key() for index in self.component]


def sample_mixture(mp, rng, count):
    '''Support by weight, then active coefficients ~ N(beta_hat_S, Gamma_S^-1), zeros elsewhere.'''
    weights = mp.weights
    chosen = rng.choice(len(mp), size=int(count), p=weights / weights.sum())
    values = np.zeros((int(count), mp.groups.p, mp.d))
    for index in np.unique(chosen):
        component = mp.components[index]
        where = np.flatnonzero(chosen == index)
        if component.dim == 0:
            continue
        z = rng.standard_normal((component.dim, len(where)))
        draws = component.mean[:, None] + scipy.linalg.solve_triangular(
            component.precision_factor, z, lower=True, trans='T')
        rows, cols = active_rows(component.support, mp.groups)
        values[where[:, None], rows[None, :], cols[None, :]] = draws.T
    return MixtureDraws(values=values, component=chosen, mixture=mp)


@dataclass(frozen=True)
class ComparisonReport:
    '''
    Chain versus mixture: total variation over supports, then moment
    discrepancies on the top-weight support (chain mean minus mixture mean,
    chain sd over mixture sd, per active coordinate).
    '''
    tv: float
    n_samples: int
    chain_weights: dict
    mixture_weights: dict
    top_support: tuple
    top_chain_frequency: float
    mean_difference: np.ndarray
    sd_ratio: np.ndarray

    def to_dict(self, max_supports=20):
        def labelled(weights):
            ranked = sorted(weights.items(), key=lambda item: -item[1])[:max_supports]
            return [{'support': [list(column) for column in key], 'weight': weight} for key, weight in ranked]
        return dict(
            tv=self.tv,
            n_samples=self.n_samples,
            chain_weights=labelled(self.chain_weights),
            mixture_weights=labelled(self.mixture_weights),
            top_support=[list(column) for column in self.top_support],
            top_chain_frequency=self.top_chain_frequency,
            mean_difference=[float(value) for value in self.mean_difference],
            sd_ratio=[float(value) for value in self.sd_ratio],
            )


def _chain_keys_and_values(chain):
    if isinstance(chain, MixtureDraws):
        return chain.support_keys(), chain.values
    samples = list(chain)
    if not samples:
        raise ValueError('no chain samples to compare')
    return [sample.support.key() for sample in samples], np.stack([sample.values for sample in samples])


def support_total_variation(chain_weights, mixture_weights):
    '''1/2 sum |w_chain - w_mix| over the union of both support alphabets.'''
    keys = set(chain_weights) | set(mixture_weights)
    return 0.5 * float(sum(abs(chain_weights.get(key, 0.0) - mixture_weights.get(key, 0.0))
                           for key in keys))


def compare_to_chain(mp, chain):
    '''
    Compare the mixture with chain output.

    chain is a sequence of ChainSample (or MixtureDraws). Chain supports
    missing from the mixture count with mixture weight 0.
    '''
    keys, values = _chain_keys_and_values(chain)
    n_samples = len(keys)
    counts = {}
    for key in keys:
        counts[key] = counts.get(key, 0) + 1
    chain_weights = {key: count / n_samples for key, count in counts.items()}
    mixture_weights = mp.support_weights()
    tv = support_total_variation(chain_weights, mixture_weights)

    top = mp.top()
    rows, cols = active_rows(top.support, mp.groups)
    matching = np.array([key == top.support.key() for key in keys])
    if top.dim and matching.any():
        active = values[matching][:, rows, cols]
        covariance = scipy.linalg.cho_solve((top.precision_factor, True), np.eye(top.dim))
        mean_difference = active.mean(axis=0) - top.mean
        spread = active.std(axis=0, ddof=1) if matching.sum() > 1 else np.full(top.dim, np.nan)
        sd_ratio = spread / np.sqrt(np.diag(covariance))
    else:
        mean_difference = np.full(top.dim, np.nan)
        sd_ratio = np.full(top.dim, np.nan)
    return ComparisonReport(
        tv=tv,
        n_samples=n_samples,
        chain_weights=chain_weights,
        mixture_weights=mixture_weights,
        top_support=top.support.key(),
        top_chain_frequency=float(matching.mean()),
        mean_difference=mean_difference,
        sd_ratio=sd_ratio,
        )


def export_mixture(mp, path):
    document = dict(
        n=mp.n,
        d=mp.d,
        group_sizes=list(mp.groups.group_sizes),
        s_cap=mp.s_cap,
        components=[
            dict(
                support=[[k, j] for k, j in component.support.pairs()],
                log_weight=component.log_weight,
                weight=float(np.exp(component.log_weight)),
                mean=[float(value) for value in component.mean],
                information=[float(value) for value in component.information.ravel(order='C')],
                dim=component.dim,
                )
            for component in mp.components
            ],
        )
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(document, handle, indent=2)
    logger.info('wrote %d mixture components to %s', len(mp), path)


def load_mixture(path):
    with open(path, 'r', encoding='utf-8') as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as error:
            raise ValueError(f'{path}, line {error.lineno}: {error.msg}') from error
    try:
        groups = GroupStructure(tuple(document['group_sizes']))
        d, n = int(document['d']), int(document['n'])
        components = []
        for entry in document['components']:
            dim = int(entry['dim'])
            information = np.asarray(entry['information'], dtype=float).reshape(dim, dim)
            lower = (cholesky_lower(information * max(n, 1), 'n I_S') if dim else np.zeros((0, 0)))
            components.append(MixtureComponent(
                support=SupportIndex.from_pairs(entry['support'], d, groups.G),
                log_weight=float(entry['log_weight']),
                mean=np.asarray(entry['mean'], dtype=float),
                information=information,
                precision_factor=lower,
                ))
    except (KeyError, TypeError) as error:
        raise ValueError(f'{path}: malformed mixture export ({error!r})') from error
    return MixturePosterior(components=tuple(components), groups=groups, d=d, n=n,
                            s_cap=int(document['s_cap']))
