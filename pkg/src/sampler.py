# -*- coding: utf-8 -*-
"""
Metropolis-within-Gibbs sampler over (S, beta, Sigma).

Each iteration draws one move:

    add / remove / swap   joint birth-death-swap moves on the support
    beta                  Gaussian random walk on every active coefficient
    covariance            eigenvalue log-scale walk plus an orthogonal move,
                          or an exact inverse-Wishart Gibbs draw

Support moves change S and beta together, so every acceptance ratio is
the exact joint posterior ratio.
"""
import json
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
from joblib import Parallel, delayed
from scipy.stats import multivariate_normal
from tqdm import tqdm

from src.domain_types import CoefficientMatrix, CovarianceEigen, Dataset, GroupStructure, SupportIndex
from src.likelihood import residual_log_likelihood, residuals
from src.math_utilities import log_binomial, nearest_orthogonal
from src.priors import (
    dimension_prior_table,
    iw_conjugate_update,
    log_inverse_gaussian,
    log_inverse_wishart,
    log_slab_density,
    log_slab_prior,
    sample_haar_orthogonal,
    sample_inverse_wishart,
    sample_slab,
    )

logger = logging.getLogger(__name__)

COVARIANCE_MODES = ('eigen', 'inverse-wishart', 'fixed')
SUPPORT_MOVES = ('add', 'remove', 'swap')
MOVES = SUPPORT_MOVES + ('beta', 'covariance')
DEFAULT_MOVE_PROBS = dict(add=0.15, remove=0.15, swap=0.10, beta=0.40, covariance=0.20)


@dataclass(frozen=True)
class SamplerConfig:
    '''
    Chain length, proposal scales and move mix.

    beta_scale, log_eigen_scale and orthogonal_scale are the random-walk
    sizes for the coefficients, the log-eigenvalues and the skew-symmetric
    generator of the orthogonal move. With adapt=True they are tuned toward
    target_acceptance during burn-in only and frozen afterwards.
    '''
    iterations: int = 20_000
    burn_in: int = 5_000
    thin: int = 10
    beta_scale: float = 0.1
    log_eigen_scale: float = 0.2
    orthogonal_scale: float = 0.1
    move_probs: dict = field(default_factory=lambda: dict(DEFAULT_MOVE_PROBS))
    covariance_mode: str = 'eigen'
    orthogonal_move: str = 'local'
    birth_proposal: str = 'prior'
    birth_scale: float = 1.0
    adapt: bool = True
    target_acceptance: float = 0.3
    keep_samples: bool = True
    progress: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1 or self.burn_in < 0 or self.thin < 1:
            raise ValueError(
                f'need iterations >= 1, burn_in >= 0, thin >= 1; got '
                f'{self.iterations}, {self.burn_in}, {self.thin}')
        for name in ('beta_scale', 'log_eigen_scale', 'orthogonal_scale', 'birth_scale'):
            if getattr(self, name) <= 0:
                raise ValueError(f'{name} must be positive, got {getattr(self, name)}')
        probs = dict(self.move_probs)
        unknown = set(probs) - set(MOVES)
        if unknown:
            raise ValueError(f'unknown moves {sorted(unknown)}; expected a subset of {MOVES}')
        if any(value < 0 for value in probs.values()):
            raise ValueError(f'move probabilities must be nonnegative, got {probs}')
        if abs(sum(probs.values()) - 1.0) > 1e-9:
            raise ValueError(f'move probabilities must sum to 1, got {sum(probs.values())}')
        object.__setattr__(self, 'move_probs', {move: float(probs.get(move, 0.0)) for move in MOVES})
        if self.covariance_mode not in COVARIANCE_MODES:
            raise ValueError(f'covariance_mode must be one of {COVARIANCE_MODES}')
        if self.orthogonal_move not in ('local', 'haar'):
            raise ValueError("orthogonal_move must be 'local' or 'haar'")
        if self.birth_proposal not in ('prior', 'residual'):
            raise ValueError("birth_proposal must be 'prior' or 'residual'")
        if not 0 < self.target_acceptance < 1:
            raise ValueError('target_acceptance must lie in (0, 1)')


@dataclass(frozen=True)
class ChainState:
    '''The sampled triple with cached log-likelihood and log-prior.'''
    beta: CoefficientMatrix
    sigma: CovarianceEigen
    log_lik: float
    log_prior: float
    covariance_mode: str = 'eigen'
    iteration: int = 0

    @property
    def support(self) -> SupportIndex:
        return self.beta.support

    @property
    def log_post(self) -> float:
        return self.log_lik + self.log_prior


class MoveStats:
    '''Proposal and acceptance counters per move name.'''

    def __init__(self):
        self.proposed = Counter()
        self.accepted = Counter()
        self._recent = []

    def record(self, name, accepted):
        self.proposed[name] += 1
        self.accepted[name] += int(bool(accepted))
        self._recent.append((name, bool(accepted)))

    def take_recent(self):
        '''(name, accepted) events recorded since the previous call.'''
        recent, self._recent = self._recent, []
        return recent

    def rates(self):
        return {name: self.accepted[name] / count for name, count in self.proposed.items() if count}


@lru_cache(maxsize=64)
def _log_dim_table(G, d, n, p_max, a):
    table = dimension_prior_table(G, d, n, p_max, a)
    table.setflags(write=False)
    return table


def log_joint_prior(beta, sigma, hp, n, covariance_mode):
    '''
    log pi(S) + slab log-density + covariance log-prior.

    The Haar factor of the eigen prior has no density and contributes a
    constant, so only the inverse-Gaussian eigenvalue terms appear.
    '''
    groups = beta.groups
    table = _log_dim_table(groups.G, beta.d, n, groups.p_max, float(hp.dim_exponent))
    s = beta.support.s
    log_prior = table[s] - log_binomial(groups.G * beta.d, s) + log_slab_prior(beta, hp)
    if covariance_mode == 'eigen':
        log_prior += float(np.sum(log_inverse_gaussian(sigma.D, hp.ig_mean, hp.ig_shape)))
    elif covariance_mode == 'inverse-wishart':
        dof, scale = _wishart_params(hp)
        log_prior += log_inverse_wishart(sigma.reconstruct(), dof, scale)
    return float(log_prior)


def _wishart_params(hp):
    if hp.wishart_dof is None or hp.wishart_scale is None:
        raise ValueError('inverse-Wishart mode needs wishart_dof and wishart_scale')
    return hp.wishart_dof, hp.wishart_scale


def make_state(beta, sigma, data, hp, covariance_mode='eigen', iteration=0):
    return ChainState(
        beta=beta,
        sigma=sigma,
        log_lik=residual_log_likelihood(residuals(beta, data), sigma),
        log_prior=log_joint_prior(beta, sigma, hp, data.n, covariance_mode),
        covariance_mode=covariance_mode,
        iteration=iteration,
        )


def initial_state(data, groups, hp, covariance_mode='eigen', sigma=None):
    '''
    Empty support, zero coefficients; Sigma from the argument, else from the
    response second moments when n > d, else the identity.
    '''
    data.check_groups(groups)
    if sigma is None:
        if data.n > data.d:
            moment = data.Y.T @ data.Y / data.n + 1e-8 * np.eye(data.d)
            sigma = CovarianceEigen.from_matrix(moment)
        else:
            sigma = CovarianceEigen.identity(data.d)
    elif not isinstance(sigma, CovarianceEigen):
        sigma = CovarianceEigen.from_matrix(sigma)
    return make_state(CoefficientMatrix.zeros(groups, data.d), sigma, data, hp, covariance_mode)


def check_state(state, data, hp, tol=1e-8):
    '''Recompute the cached values; raise if they drifted beyond tol.'''
    fresh = make_state(state.beta, state.sigma, data, hp, state.covariance_mode)
    if (abs(fresh.log_lik - state.log_lik) > tol * max(1.0, abs(fresh.log_lik))
            or abs(fresh.log_prior - state.log_prior) > tol * max(1.0, abs(fresh.log_prior))):
        raise ValueError(
            f'cached log-likelihood/prior ({state.log_lik}, {state.log_prior}) differ from '
            f'recomputed ({fresh.log_lik}, {fresh.log_prior})')
    return True


def _metropolis(log_ratio, rng):
    return bool(np.log(rng.random()) < log_ratio)


def _block_proposal(beta, data, sigma, k, j, config):
    '''
    Proposal law for a newborn block at (k, j), given the state without it.

    prior: the slab itself. residual: Gaussian centred at the ridge fit of
    residual column k on the columns of group j.
    '''
    size = beta.groups.group_sizes[j]
    if config.birth_proposal == 'prior' or data.n == 0:
        return None, size
    Xj = data.X[:, beta.groups.columns(j)]
    residual = data.Y[:, k] - data.X @ beta.values[:, k]
    gram = Xj.T @ Xj + np.eye(size)
    mean = scipy.linalg.solve(gram, Xj.T @ residual, assume_a='pos')
    noise = sigma.reconstruct()[k, k]
    cov = config.birth_scale ** 2 * noise * np.linalg.inv(gram)
    return multivariate_normal(mean=mean, cov=(cov + cov.T) / 2), size


def _draw_block(proposal, size, lam, rng):
    if proposal is None:
        return sample_slab([size], lam, rng)
    return np.atleast_1d(proposal.rvs(random_state=rng))


def _log_block_density(proposal, block, size, lam):
    if proposal is None:
        return log_slab_density(block, [size], lam)
    return float(proposal.logpdf(block))


def step_support(state, data, hp, rng, config=None, stats=None, kind=None):
    '''
    One birth, death or swap move on the (column, group) support.

    A kind that is infeasible at the current size (death or swap at s = 0,
    birth or swap at s = Gd) is rejected and the state returned unchanged.
    '''
    config = config or SamplerConfig()
    probs = config.move_probs
    if kind is None:
        weights = np.array([probs[move] for move in SUPPORT_MOVES])
        if weights.sum() == 0:
            weights = np.ones(len(SUPPORT_MOVES))
        kind = SUPPORT_MOVES[rng.choice(len(SUPPORT_MOVES), p=weights / weights.sum())]
    beta = state.beta
    support = beta.support
    total = support.n_groups * support.d
    s = support.s
    if (kind in ('remove', 'swap') and s == 0) or (kind in ('add', 'swap') and s == total):
        if stats is not None:
            stats.record(kind, False)
        return state

    sigma = state.sigma
    if kind == 'add':
        inactive = support.inactive_pairs()
        k, j = inactive[rng.integers(len(inactive))]
        proposal, size = _block_proposal(beta, data, sigma, k, j, config)
        block = _draw_block(proposal, size, hp.lam[k], rng)
        new_beta = beta.with_block(k, j, block)
        log_forward = np.log(probs['add']) - np.log(total - s) + _log_block_density(proposal, block, size, hp.lam[k])
        log_reverse = np.log(probs['remove']) - np.log(s + 1)
    elif kind == 'remove':
        active = support.pairs()
        k, j = active[rng.integers(len(active))]
        block = beta.block(k, j)
        new_beta = beta.without_block(k, j)
        proposal, size = _block_proposal(new_beta, data, sigma, k, j, config)
        log_forward = np.log(probs['remove']) - np.log(s)
        log_reverse = (np.log(probs['add']) - np.log(total - s + 1)
                       + _log_block_density(proposal, block, size, hp.lam[k]))
    else:
        active = support.pairs()
        k_old, j_old = active[rng.integers(len(active))]
        inactive = support.inactive_pairs()
        k_new, j_new = inactive[rng.integers(len(inactive))]
        old_block = beta.block(k_old, j_old)
        middle = beta.without_block(k_old, j_old)
        proposal_new, size_new = _block_proposal(middle, data, sigma, k_new, j_new, config)
        new_block = _draw_block(proposal_new, size_new, hp.lam[k_new], rng)
        new_beta = middle.with_block(k_new, j_new, new_block)
        proposal_old, size_old = _block_proposal(middle, data, sigma, k_old, j_old, config)
        # pair-selection probabilities are the same in both directions
        log_forward = _log_block_density(proposal_new, new_block, size_new, hp.lam[k_new])
        log_reverse = _log_block_density(proposal_old, old_block, size_old, hp.lam[k_old])

    candidate = make_state(new_beta, sigma, data, hp, state.covariance_mode, state.iteration)
    log_ratio = candidate.log_post - state.log_post + log_reverse - log_forward
    accepted = _metropolis(log_ratio, rng)
    if stats is not None:
        stats.record(kind, accepted)
    return candidate if accepted else state


def step_beta(state, data, hp, rng, config=None, stats=None):
    '''Gaussian random walk on all active coefficients; no-op on an empty support.'''
    config = config or SamplerConfig()
    beta = state.beta
    if beta.support.s == 0:
        return state
    theta = beta.active_vector()
    proposal = theta + config.beta_scale * rng.standard_normal(theta.shape)
    candidate = make_state(beta.with_active_vector(proposal), state.sigma, data, hp,
                           state.covariance_mode, state.iteration)
    accepted = _metropolis(candidate.log_post - state.log_post, rng)
    if stats is not None:
        stats.record('beta', accepted)
    return candidate if accepted else state


def _random_rotation(d, scale, rng):
    '''exp(A) for a skew-symmetric A with Normal(0, scale^2) upper entries.'''
    upper = np.triu(rng.normal(0.0, scale, size=(d, d)), k=1)
    return scipy.linalg.expm(upper - upper.T)


def step_covariance_eigen(state, data, hp, rng, config=None, stats=None):
    '''
    d log-scale random-walk moves on eigenvalues at uniformly drawn
    positions, then one move of P.

    The eigenvalue acceptance ratio carries the inverse-Gaussian prior and
    the log-scale Jacobian D'/D. The P move (P <- P exp(A), or a fresh Haar
    draw) is symmetric, so it is accepted on the likelihood ratio alone.
    Eigenvalues are kept in descending order, P's columns following them.
    '''
    config = config or SamplerConfig()
    R = residuals(state.beta, data)
    P, D = np.array(state.sigma.P), np.array(state.sigma.D)
    log_lik = state.log_lik
    changed = False
    for _ in range(len(D)):
        i = rng.integers(len(D))
        proposed = D.copy()
        proposed[i] = D[i] * np.exp(config.log_eigen_scale * rng.standard_normal())
        sigma = CovarianceEigen(P, proposed)
        proposed_lik = residual_log_likelihood(R, sigma)
        log_ratio = (proposed_lik - log_lik
                     + log_inverse_gaussian(proposed[i], hp.ig_mean, hp.ig_shape)
                     - log_inverse_gaussian(D[i], hp.ig_mean, hp.ig_shape)
                     + np.log(proposed[i]) - np.log(D[i]))
        accepted = _metropolis(log_ratio, rng)
        if stats is not None:
            stats.record('eigenvalue', accepted)
        if accepted:
            order = np.argsort(proposed)[::-1]
            P, D = P[:, order], proposed[order]
            log_lik = proposed_lik
            changed = True

    if len(D) > 1:
        if config.orthogonal_move == 'haar':
            proposed_P = sample_haar_orthogonal(len(D), rng)
        else:
            proposed_P = nearest_orthogonal(P @ _random_rotation(len(D), config.orthogonal_scale, rng))
        proposed_lik = residual_log_likelihood(R, CovarianceEigen(proposed_P, D))
        accepted = _metropolis(proposed_lik - log_lik, rng)
        if stats is not None:
            stats.record('orthogonal', accepted)
        if accepted:
            P = proposed_P
            changed = True

    if not changed:
        return state
    return make_state(state.beta, CovarianceEigen(P, D), data, hp, state.covariance_mode, state.iteration)


def step_covariance_iw(state, data, hp, rng, config=None, stats=None):
    '''Exact Gibbs draw Sigma ~ IW(nu + n, Phi + sum_i r_i' r_i).'''
    dof, scale = _wishart_params(hp)
    dof, scale = iw_conjugate_update(dof, scale, residuals(state.beta, data))
    sigma = CovarianceEigen.from_matrix(sample_inverse_wishart(dof, scale, rng))
    if stats is not None:
        stats.record('covariance', True)
    return make_state(state.beta, sigma, data, hp, state.covariance_mode, state.iteration)


def step_covariance(state, data, hp, rng, config=None, stats=None):
    config = config or SamplerConfig()
    if config.covariance_mode == 'eigen':
        return step_covariance_eigen(state, data, hp, rng, config, stats)
    if config.covariance_mode == 'inverse-wishart':
        return step_covariance_iw(state, data, hp, rng, config, stats)
    return state


def effective_sample_size(trace):
    '''
    ESS from FFT autocorrelations, truncated by Geyer's initial monotone
    positive-pair sequence.
    '''
    x = np.asarray(trace, dtype=float)
    n = len(x)
    if n < 4:
        return float(n)
    x = x - x.mean()
    variance = np.dot(x, x) / n
    if variance <= 0:
        return float(n)
    size = 1 << (2 * n - 1).bit_length()
    spectrum = np.fft.rfft(x, size)
    acf = np.fft.irfft(spectrum * np.conjugate(spectrum), size)[:n] / (n * variance)
    pairs = acf[:n - 1:2][: (n - 1) // 2] + acf[1:n:2][: (n - 1) // 2]
    positive = np.flatnonzero(pairs <= 0)
    stop = positive[0] if len(positive) else len(pairs)
    pairs = np.minimum.accumulate(pairs[:stop])
    tau = -1.0 + 2.0 * np.sum(pairs)
    return float(n / max(tau, 1.0 / n))


@dataclass
class ChainDiagnostics:
    acceptance: dict
    proposals: dict
    ess: dict
    support_visits: dict
    n_kept: int
    final_scales: dict

    def to_dict(self):
        visits = {json.dumps([list(column) for column in key]): count
                  for key, count in sorted(self.support_visits.items(), key=lambda item: -item[1])}
        return dict(acceptance=self.acceptance, proposals=self.proposals, ess=self.ess,
                    support_visits=visits, n_kept=self.n_kept, final_scales=self.final_scales)


@dataclass(frozen=True)
class ChainSample:
    iteration: int
    support: SupportIndex
    values: np.ndarray
    D: np.ndarray
    P: np.ndarray
    loglik: float

    @classmethod
    def from_state(cls, state, iteration):
        return cls(iteration, state.support, state.beta.values, state.sigma.D, state.sigma.P, state.log_lik)

    def sigma(self):
        return (self.P * self.D) @ self.P.T

    def to_record(self):
        rows, cols = np.nonzero(self.values)
        return {
            'iter': int(self.iteration),
            's': int(self.support.s),
            'support': [[int(k), int(j)] for k, j in self.support.pairs()],
            'beta': [[int(r), int(c), float(self.values[r, c])] for r, c in zip(rows, cols)],
            'D': [float(value) for value in self.D],
            'P': [float(value) for value in self.P.ravel(order='C')],
            'loglik': float(self.loglik),
            }

    @classmethod
    def from_record(cls, record, groups, d):
        values = np.zeros((groups.p, d))
        for row, col, value in record['beta']:
            values[int(row), int(col)] = value
        support = SupportIndex.from_pairs(record['support'], d, groups.G)
        return cls(
            iteration=int(record['iter']),
            support=support,
            values=values,
            D=np.asarray(record['D'], dtype=float),
            P=np.asarray(record['P'], dtype=float).reshape(d, d),
            loglik=float(record['loglik']),
            )


@dataclass
class ChainRun:
    diagnostics: ChainDiagnostics
    samples: list
    final_state: ChainState


class ChainWriter:
    '''Line-delimited JSON writer for kept samples; one writer per chain.'''

    def __init__(self, path):
        self.path = path
        self._handle = None

    def __enter__(self):
        self._handle = open(self.path, 'w', encoding='utf-8')
        return self

    def __exit__(self, *exc_info):
        self.close()

    def __call__(self, sample):
        if self._handle is None:
            raise ValueError(f'chain writer for {self.path} is not open')
        self._handle.write(json.dumps(sample.to_record()) + '\n')

    def close(self):
        if self._handle is not None:
            self._handle.close()
            self._handle = None


def read_chain(path, groups, d):
    samples = []
    with open(path, 'r', encoding='utf-8') as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                samples.append(ChainSample.from_record(record, groups, d))
            except (ValueError, KeyError, TypeError) as error:
                raise ValueError(f'{path}, line {number}: malformed chain record ({error})') from error
    return samples


_SCALE_FOR_MOVE = dict(beta='beta_scale', eigenvalue='log_eigen_scale', orthogonal='orthogonal_scale')


def _adapt(config, name, accepted, count):
    attribute = _SCALE_FOR_MOVE.get(name)
    if attribute is None:
        return config
    step = count ** -0.6
    scale = getattr(config, attribute) * np.exp(step * (float(accepted) - config.target_acceptance))
    return replace(config, **{attribute: float(np.clip(scale, 1e-6, 1e3))})


def run_chain(data: Dataset, groups: GroupStructure, hp, config: SamplerConfig,
              callbacks: Sequence[Callable] = (), initial: Optional[ChainState] = None,
              sigma: Optional[np.ndarray] = None) -> ChainRun:
    '''
    Run one chain.

    Parameters
    ----------
    data : Dataset
    groups : GroupStructure
    hp : HyperParams
    config : SamplerConfig
        the seed fixes the whole sample stream
    callbacks : sequence of callables
        each receives every kept ChainSample (thinned, after burn-in)
    initial : ChainState, optional
        starting state; by default an empty support
    sigma : np.ndarray, optional
        starting covariance; the value held fixed in 'fixed' mode

    Returns
    -------
    ChainRun
        diagnostics, kept samples (when config.keep_samples) and final state

    '''
    if config.covariance_mode == 'fixed' and sigma is None and initial is None:
        raise ValueError("covariance_mode 'fixed' needs the covariance to hold")
    rng = np.random.default_rng(config.seed)
    state = initial or initial_state(data, groups, hp, config.covariance_mode, sigma)
    if state.covariance_mode != config.covariance_mode:
        state = make_state(state.beta, state.sigma, data, hp, config.covariance_mode, state.iteration)
    moves = [move for move in MOVES if config.move_probs[move] > 0]
    probs = np.array([config.move_probs[move] for move in moves])
    stats = MoveStats()
    traces = dict(loglik=[], s=[], beta_fro=[])
    visits = Counter()
    samples = []
    logger.info('chain start: n=%d p=%d d=%d, %d iterations (burn-in %d, thin %d), seed %d',
                data.n, data.p, data.d, config.iterations, config.burn_in, config.thin, config.seed)

    iterator = range(config.iterations)
    if config.progress:
        iterator = tqdm(iterator, desc='chain', leave=False)
    for t in iterator:
        move = moves[rng.choice(len(moves), p=probs)]
        if move in SUPPORT_MOVES:
            state = step_support(state, data, hp, rng, config, stats, kind=move)
        elif move == 'beta':
            state = step_beta(state, data, hp, rng, config, stats)
        else:
            state = step_covariance(state, data, hp, rng, config, stats)
        state = replace(state, iteration=t + 1)

        recent = stats.take_recent()
        if config.adapt and t < config.burn_in:
            for name, accepted in recent:
                config = _adapt(config, name, accepted, stats.proposed[name])
            if t + 1 == config.burn_in:
                logger.info('burn-in adaptation finished: beta %.4g, log-eigen %.4g, orthogonal %.4g',
                            config.beta_scale, config.log_eigen_scale, config.orthogonal_scale)

        if t >= config.burn_in and (t - config.burn_in) % config.thin == 0:
            sample = ChainSample.from_state(state, t + 1)
            visits[state.support.key()] += 1
            traces['loglik'].append(state.log_lik)
            traces['s'].append(state.support.s)
            traces['beta_fro'].append(float(np.linalg.norm(state.beta.values)))
            for callback in callbacks:
                callback(sample)
            if config.keep_samples:
                samples.append(sample)

    diagnostics = ChainDiagnostics(
        acceptance=stats.rates(),
        proposals=dict(stats.proposed),
        ess={name: effective_sample_size(values) for name, values in traces.items()},
        support_visits=dict(visits),
        n_kept=len(traces['s']),
        final_scales=dict(beta=config.beta_scale, log_eigen=config.log_eigen_scale,
                          orthogonal=config.orthogonal_scale),
        )
    logger.info('chain end: kept %d samples, acceptance %s', diagnostics.n_kept,
                {name: round(rate, 3) for name, rate in diagnostics.acceptance.items()})
    return ChainRun(diagnostics=diagnostics, samples=samples, final_state=state)


def derive_seed(master, *counters):
    '''Seed for replication/chain counters under a master seed (SeedSequence([m, r, c]))'''
    return int(np.random.SeedSequence([int(master), *[int(c) for c in counters]]).generate_state(1)[0])


def _run_chain_to_file(data, groups, hp, config, path, sigma):
    if path is None:
        return run_chain(data, groups, hp, config, sigma=sigma)
    with ChainWriter(path) as writer:
        return run_chain(data, groups, hp, config, callbacks=[writer], sigma=sigma)


def run_chains(data, groups, hp, config, n_chains, workers=1, paths=None, sigma=None, replication=0):
    '''
    Independent chains through joblib workers, one writer per chain.

    config.seed is the master seed m; chain c of replication r runs on
    SeedSequence([m, r, c]).
    '''
    paths = paths or [None] * n_chains
    if len(paths) != n_chains:
        raise ValueError(f'got {len(paths)} output paths for {n_chains} chains')
    configs = [replace(config, seed=derive_seed(config.seed, replication, c), progress=False)
               for c in range(n_chains)]
    return Parallel(n_jobs=workers)(
        delayed(_run_chain_to_file)(data, groups, hp, chain_config, path, sigma)
        for chain_config, path in zip(configs, paths)
        )
