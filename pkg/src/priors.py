# -*- coding: utf-8 -*-
"""
Prior log-densities and exact samplers.

    - dimension prior pi(s) proportional to (G v n^p_max)^(-a s) on 0..Gd
    - uniform choice of the support given its size
    - l2,1 slab on each active (column, group) block
    - covariance through Sigma = P D P' with Haar P and inverse-Gaussian D
    - the conjugate inverse-Wishart alternative
    - tail bounds for the eigenvalues of a Wishart matrix, checked against
      Monte-Carlo draws
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.special import gammaln, logsumexp, multigammaln

from src.math_utilities import cholesky_lower, log_binomial, log_det_from_cholesky


@lru_cache(maxsize=None)
def log_slab_norm_const(m):
    if int(m) != m or m < 1:
        raise ValueError(f'slab block dimension must be a positive integer, got {m}')
    m = int(m)
    return 0.5 * np.log(np.pi) + (gammaln(m + 1) - gammaln(m / 2 + 1)) / m


def slab_norm_const(m):
    '''
    Normalizing constant a_m of the slab (lambda/a_m)^m exp(-lambda ||x||) on R^m.

    a_m = sqrt(pi) (Gamma(m + 1) / Gamma(m/2 + 1))^(1/m), evaluated through
    log-gamma.
    '''
    return float(np.exp(log_slab_norm_const(m)))


@dataclass(frozen=True)
class SlabConstantTable:
    '''Cache of a_m for m = 1..p_max.'''
    p_max: int

    def __post_init__(self):
        if self.p_max < 1:
            raise ValueError(f'p_max must be at least 1, got {self.p_max}')

    def _check(self, m):
        if m > self.p_max:
            raise KeyError(f'block dimension {m} exceeds p_max = {self.p_max}')

    def __getitem__(self, m):
        self._check(m)
        return slab_norm_const(m)

    def log(self, m):
        self._check(m)
        return log_slab_norm_const(m)

    def as_array(self):
        return np.array([slab_norm_const(m) for m in range(1, self.p_max + 1)])


def log_slab_density(beta_active, active_sizes, lam):
    '''
    Log-density of the l2,1 slab for the active blocks of one response column.

    Parameters
    ----------
    beta_active : np.ndarray
        active blocks stacked in group order
    active_sizes : sequence of int
        block dimensions p_j of the active groups
    lam : float
        slab rate lambda_k

    Returns
    -------
    float
        sum_j p_j log(lam / a_pj) - lam sum_j ||block_j||

    '''
    if lam <= 0:
        raise ValueError(f'slab rate must be positive, got {lam}')
    beta_active = np.asarray(beta_active, dtype=float)
    sizes = [int(size) for size in active_sizes]
    if beta_active.shape != (sum(sizes),):
        raise ValueError(
            f'active coefficients have shape {beta_active.shape}, expected ({sum(sizes)},)')
    log_density = 0.0
    position = 0
    for size in sizes:
        block = beta_active[position:position + size]
        log_density += size * (np.log(lam) - log_slab_norm_const(size)) - lam * np.linalg.norm(block)
        position += size
    return float(log_density)


def log_slab_prior(beta, hp):
    '''Slab log-density summed over every active block of a CoefficientMatrix.'''
    norms = beta.groups.block_norms(beta.values)
    constants = SlabConstantTable(beta.groups.p_max)
    log_density = 0.0
    for k, j in beta.support.pairs():
        size = beta.groups.group_sizes[j]
        lam = hp.lam[k]
        log_density += size * (np.log(lam) - constants.log(size)) - lam * norms[j, k]
    return float(log_density)


def sample_slab(active_sizes, lam, rng):
    '''
    Exact slab draw: uniform direction on the sphere, Gamma(p_j, rate lam) radius.

    Returns the blocks stacked in the order of active_sizes.
    '''
    if lam <= 0:
        raise ValueError(f'slab rate must be positive, got {lam}')
    blocks = []
    for size in active_sizes:
        direction = rng.standard_normal(size)
        direction /= np.linalg.norm(direction)
        radius = rng.gamma(shape=size, scale=1.0 / lam)
        blocks.append(radius * direction)
    if not blocks:
        return np.zeros(0)
    return np.concatenate(blocks)


def slab_mass_estimate(m, lam, rng, n_draws=1_000_000):
    '''
    Importance-sampling estimate of the slab's total mass on R^m, with its
    standard error.

    The proposal is a product of Laplace laws with rate lam / (2 sqrt(m)),
    whose tails dominate the slab, so the weights stay bounded.
    '''
    if lam <= 0:
        raise ValueError(f'slab rate must be positive, got {lam}')
    rate = lam / (2 * np.sqrt(m))
    x = rng.laplace(0.0, 1.0 / rate, size=(int(n_draws), int(m)))
    log_proposal = m * np.log(rate / 2) - rate * np.abs(x).sum(axis=1)
    log_slab = m * (np.log(lam) - log_slab_norm_const(m)) - lam * np.linalg.norm(x, axis=1)
    weights = np.exp(log_slab - log_proposal)
    return float(weights.mean()), float(weights.std(ddof=1) / np.sqrt(len(weights)))


def dimension_prior_table(G, d, n, p_max, a=1.0):
    '''
    Normalized log pi(s) for s = 0..Gd.

    pi(s) is proportional to (G v n^p_max)^(-a s), so that every ratio
    pi(s)/pi(s-1) equals (G v n^p_max)^(-a).
    '''
    if a <= 0:
        raise ValueError(f'dimension prior exponent must be positive, got {a}')
    log_base = np.log(G)
    if n >= 1:
        log_base = max(log_base, p_max * np.log(n))
    raw = -a * log_base * np.arange(G * d + 1)
    return raw - logsumexp(raw)


def log_dimension_prior(s, G, d, n, p_max, a=1.0):
    if s < 0 or s > G * d:
        raise ValueError(f'dimension {s} outside 0..{G * d}')
    return float(dimension_prior_table(G, d, n, p_max, a)[s])


def log_support_prior(support, G, d, log_dim_table):
    '''log pi(s) - log C(Gd, s): each support of a given size is equally likely.'''
    s = support.s
    return float(log_dim_table[s] - log_binomial(G * d, s))


def sample_haar_orthogonal(d, rng):
    '''
    Haar-distributed d x d orthogonal matrix.

    QR of a standard normal matrix with the signs of diag(R) folded into Q.
    '''
    if d < 1:
        raise ValueError(f'dimension must be positive, got {d}')
    Z = rng.standard_normal((d, d))
    Q, R = np.linalg.qr(Z)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def _check_positive(**values):
    for name, value in values.items():
        if np.any(np.asarray(value) <= 0):
            raise ValueError(f'{name} must be positive, got {value}')


def log_inverse_gaussian(x, mean, shape):
    _check_positive(x=x, mean=mean, shape=shape)
    x = np.asarray(x, dtype=float)
    log_density = (0.5 * np.log(shape / (2 * np.pi * x ** 3))
                   - shape * (x - mean) ** 2 / (2 * mean ** 2 * x))
    return float(log_density) if log_density.ndim == 0 else log_density


def sample_inverse_gaussian(mean, shape, rng, size=None):
    _check_positive(mean=mean, shape=shape)
    # numpy's Wald distribution is the inverse Gaussian law
    return rng.wald(mean, shape, size=size)


def log_inverse_wishart(sigma, nu, phi):
    '''
    Log-density of Sigma ~ IW(nu, Phi), i.e. Sigma^-1 ~ Wishart(nu, Phi^-1).

    For d = 1 this is the inverse-gamma density with shape nu/2 and scale Phi/2.
    '''
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    d = sigma.shape[0]
    if nu <= d - 1:
        raise ValueError(f'degrees of freedom must exceed d - 1 = {d - 1}, got {nu}')
    sigma_lower = cholesky_lower(sigma, 'Sigma')
    phi_lower = cholesky_lower(phi, 'Phi')
    trace_term = np.trace(scipy.linalg.cho_solve((sigma_lower, True), phi))
    return float(
        0.5 * nu * log_det_from_cholesky(phi_lower)
        - 0.5 * nu * d * np.log(2.0)
        - multigammaln(nu / 2.0, d)
        - 0.5 * (nu + d + 1) * log_det_from_cholesky(sigma_lower)
        - 0.5 * trace_term
        )


def _bartlett_factor(nu, d, rng, size):
    '''Stack of lower-triangular Bartlett factors A with A A' ~ Wishart(nu, I).'''
    A = np.zeros((size, d, d))
    rows, cols = np.tril_indices(d, k=-1)
    A[:, rows, cols] = rng.standard_normal((size, len(rows)))
    dofs = nu - np.arange(d)
    A[:, np.arange(d), np.arange(d)] = np.sqrt(rng.chisquare(dofs, size=(size, d)))
    return A


def sample_wishart(nu, psi, rng, size=None):
    '''Wishart(nu, Psi) draws through the Bartlett decomposition.'''
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    d = psi.shape[0]
    if nu <= d - 1:
        raise ValueError(f'degrees of freedom must exceed d - 1 = {d - 1}, got {nu}')
    lower = cholesky_lower(psi, 'Psi')
    count = 1 if size is None else int(size)
    LA = lower @ _bartlett_factor(nu, d, rng, count)
    draws = LA @ np.transpose(LA, (0, 2, 1))
    return draws[0] if size is None else draws


def sample_inverse_wishart(nu, phi, rng):
    '''Sigma ~ IW(nu, Phi): invert a Bartlett draw of Wishart(nu, Phi^-1).'''
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    d = phi.shape[0]
    if nu <= d - 1:
        raise ValueError(f'degrees of freedom must exceed d - 1 = {d - 1}, got {nu}')
    phi_lower = cholesky_lower(phi, 'Phi')
    # lower Cholesky factor of Phi^-1 from the factor of Phi
    inverse_upper = scipy.linalg.solve_triangular(phi_lower, np.eye(d), lower=True).T
    inverse_lower = cholesky_lower(inverse_upper @ inverse_upper.T, 'Phi^-1')
    LA = inverse_lower @ _bartlett_factor(nu, d, rng, 1)[0]
    LA_inverse = scipy.linalg.solve_triangular(LA, np.eye(d), lower=True)
    sigma = LA_inverse.T @ LA_inverse
    return (sigma + sigma.T) / 2


def iw_conjugate_update(nu, phi, residuals):
    '''Posterior (nu + n, Phi + sum_i r_i' r_i) of the inverse-Wishart prior.'''
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    residuals = np.asarray(residuals, dtype=float).reshape(-1, phi.shape[0])
    return nu + residuals.shape[0], phi + residuals.T @ residuals


@dataclass(frozen=True)
class WishartTailReport:
    '''
    Bounds and Monte-Carlo frequencies for three eigenvalue events of
    W ~ Wishart(nu, Psi) with eigenvalues rho_1 <= ... <= rho_d:

        upper   P(rho_d >= t1 ||Psi||)              <= bound
        lower   P(rho_1 <= t2)                      <= bound
        band    P(a_k <= rho_k <= a_k (1 + t3), all k) >= bound
    '''
    nu: int
    d: int
    t1: float
    t2: float
    t3: float
    a: tuple
    log_bounds: dict
    empirical: dict
    n_draws: int

    @property
    def bounds(self):
        return {name: float(np.exp(value)) for name, value in self.log_bounds.items()}

    def holds(self):
        bounds = self.bounds
        return (self.empirical['upper'] <= bounds['upper']
                and self.empirical['lower'] <= bounds['lower']
                and self.empirical['band'] >= bounds['band'])

    def to_dict(self):
        return dict(
            nu=self.nu, d=self.d, t1=self.t1, t2=self.t2, t3=self.t3, a=list(self.a),
            log_bounds=self.log_bounds, bounds=self.bounds,
            empirical=self.empirical, n_draws=self.n_draws, holds=bool(self.holds()),
            )


def wishart_tail_log_bounds(nu, psi, t1, t2, t3, a):
    '''The three eigenvalue tail bounds, in log space.'''
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    d = psi.shape[0]
    a = np.asarray(a, dtype=float)
    if int(nu) != nu or nu < d:
        raise ValueError(f'nu must be an integer >= d = {d}, got {nu}')
    if t1 < nu * d:
        raise ValueError(f't1 must be at least nu d = {nu * d}, got {t1}')
    if t2 <= 0:
        raise ValueError(f't2 must be positive, got {t2}')
    if not 0 <= t3 <= 1:
        raise ValueError(f't3 must lie in [0, 1], got {t3}')
    if a.shape != (d,) or np.any(a < 0) or np.any(np.diff(a) < 0):
        raise ValueError(f'a must be {d} nondecreasing nonnegative values, got {a}')
    psi_lower = cholesky_lower(psi, 'Psi')
    log_det_psi = log_det_from_cholesky(psi_lower)
    log_norm_psi = np.log(np.linalg.norm(psi, 2))
    nd = nu * d

    log_upper = 0.5 * nd * np.log(t1 / nd) + 0.5 * nd - 0.5 * t1
    log_lower = (0.5 * d * (nu + d) * np.log((nu + d) / (2 * np.e))
                 + d * np.log(np.e * (nu + d) / np.sqrt(np.pi))
                 - 0.5 * (nu + d + 1) * np.log(2.0)
                 + 0.5 * (nu - d - 1) * np.log(t2)
                 - 0.5 * nu * log_det_psi
                 + 0.5 * (d - 1) * (nu + 1) * log_norm_psi)
    scale = a[0] * t3
    if scale == 0:
        log_band = -np.inf
    else:
        trace_inverse = np.trace(scipy.linalg.cho_solve((psi_lower, True), np.eye(d)))
        log_band = (-d * np.log(scale * np.e ** 2 * nu / (8 * np.sqrt(np.pi)))
                    - 0.5 * nd * np.log(2 * nd / (np.e * scale))
                    - 0.5 * d ** 2 * np.log(d / (2 * np.e))
                    - 0.5 * nu * log_det_psi
                    - 0.5 * a[0] * (1 + t3) * trace_inverse)
    return dict(upper=float(log_upper), lower=float(log_lower), band=float(log_band))


def wishart_tail_bounds(nu, psi, t1, t2, t3, a, rng, n_draws=10_000):
    '''Compute the tail bounds and the empirical event frequencies from Bartlett draws.'''
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    a = np.asarray(a, dtype=float)
    log_bounds = wishart_tail_log_bounds(nu, psi, t1, t2, t3, a)
    rho = np.linalg.eigvalsh(sample_wishart(nu, psi, rng, size=n_draws))
    norm_psi = np.linalg.norm(psi, 2)
    band = np.all((rho >= a) & (rho <= a * (1 + t3)), axis=1)
    empirical = dict(
        upper=float(np.mean(rho[:, -1] >= t1 * norm_psi)),
        lower=float(np.mean(rho[:, 0] <= t2)),
        band=float(np.mean(band)),
        )
    return WishartTailReport(
        nu=int(nu), d=psi.shape[0], t1=float(t1), t2=float(t2), t3=float(t3),
        a=tuple(float(value) for value in a), log_bounds=log_bounds,
        empirical=empirical, n_draws=int(n_draws),
        )
