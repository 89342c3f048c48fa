# -*- coding: utf-8 -*-
"""
Simulation scenarios.

    contraction     posterior prediction loss against n
    selection       modal support against S0 across signal strengths
    bvm-compare     chain support marginal against the Gaussian mixture
    prior-checks    slab normalization, radius law, prior-only stationarity
    wishart-tails   eigenvalue tail bounds against Wishart draws

Replication r of arm a uses the counter index i = a R + r (R replications
per arm): data from SeedSequence([m, i]), chain c from SeedSequence([m, i, c]).
"""
import logging
import os
import time
from dataclasses import dataclass, field, replace
from math import ceil

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import stats
from tqdm import tqdm

from harness.data_handler import generate_data, write_json
from src.bvm import build_mixture, compare_to_chain
from src.domain_types import Dataset, GroupStructure, HyperParams
from src.math_utilities import group_operator_norm
from src.metrics import (
    covariance_loss,
    design_rates,
    dimension_threshold,
    effective_dimension,
    modal_support,
    recovery_report,
    selection_report,
    theoretical_rates,
    )
from src.priors import (
    dimension_prior_table,
    sample_slab,
    sample_wishart,
    slab_mass_estimate,
    slab_norm_const,
    wishart_tail_bounds,
    )
from src.sampler import derive_seed, run_chains

logger = logging.getLogger(__name__)


class ReplicationError(RuntimeError):
    """A replication failed; carries the scenario and the replication index."""

    def __init__(self, scenario, replication, error):
        super().__init__(f'{scenario} replication {replication} failed: {error}')
        self.scenario = scenario
        self.replication = replication


@dataclass
class RunReport:
    scenario: str
    rows: pd.DataFrame
    aggregates: dict
    table: pd.DataFrame
    rates: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def recompute_aggregates(self):
        return aggregate(self.scenario, self.rows)[0]

    def to_dict(self):
        return dict(
            scenario=self.scenario,
            aggregates=self.aggregates,
            rates=self.rates,
            timings=self.timings,
            rows=self.rows.to_dict(orient='records'),
            config=self.config,
            )

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        stem = self.scenario.replace('-', '_')
        write_json(os.path.join(directory, f'{stem}_report.json'), self.to_dict())
        self.rows.to_csv(os.path.join(directory, f'{stem}_rows.csv'), index=False)
        self.table.to_csv(os.path.join(directory, f'{stem}_table.csv'), index=False)
        logger.info('wrote %s report to %s', self.scenario, directory)


def _aggregate_contraction(rows):
    grouped = rows.groupby('n')['prediction_loss']
    table = pd.DataFrame({
        'n': grouped.mean().index,
        'mean_prediction_loss': grouped.mean().to_numpy(),
        'q10': grouped.quantile(0.1).to_numpy(),
        'q50': grouped.quantile(0.5).to_numpy(),
        'q90': grouped.quantile(0.9).to_numpy(),
        'mean_covariance_loss': rows.groupby('n')['covariance_loss'].mean().to_numpy(),
        'eps_n_sq': rows.groupby('n')['eps_n_sq'].mean().to_numpy(),
        })
    means = table['mean_prediction_loss'].to_numpy()
    aggregates = dict(
        mean_prediction_loss={int(n): float(value) for n, value in zip(table['n'], means)},
        loss_ratio_first_last=float(means[0] / means[-1]) if means[-1] > 0 else None,
        decreasing=bool(np.all(np.diff(means) < 0)),
        )
    return aggregates, table


def _aggregate_selection(rows):
    grouped = rows.groupby('multiple')
    table = pd.DataFrame({
        'multiple': grouped['modal_match'].mean().index,
        'modal_match_rate': grouped['modal_match'].mean().to_numpy(),
        'mean_posterior_s0': grouped['posterior_s0'].mean().to_numpy(),
        'mean_missed': grouped['missed'].mean().to_numpy(),
        'mean_false': grouped['false'].mean().to_numpy(),
        })
    aggregates = dict(modal_match_rate={float(m): float(rate) for m, rate in
                                        zip(table['multiple'], table['modal_match_rate'])})
    return aggregates, table


def _aggregate_bvm(rows):
    table = rows[['replication', 'tv', 'tv_misspecified', 'weight_s0']].copy()
    aggregates = dict(
        mean_tv=float(rows['tv'].mean()),
        mean_tv_misspecified=float(rows['tv_misspecified'].mean()),
        tv_below_0_1=float((rows['tv'] < 0.1).mean()),
        weight_s0_above_0_9=float((rows['weight_s0'] > 0.9).mean()),
        )
    return aggregates, table


def _aggregate_checks(rows):
    table = rows.copy()
    aggregates = dict(all_passed=bool(rows['passed'].all()), n_checks=int(len(rows)),
                      failed=rows.loc[~rows['passed'], 'check'].tolist())
    return aggregates, table


AGGREGATORS = {
    'contraction': _aggregate_contraction,
    'selection': _aggregate_selection,
    'bvm-compare': _aggregate_bvm,
    'prior-checks': _aggregate_checks,
    'wishart-tails': _aggregate_checks,
    }


def aggregate(scenario, rows):
    """Aggregates and the plotting table, recomputed from per-replication rows."""
    return AGGREGATORS[scenario](rows)


def _posterior(config, instance, hp, index, sigma=None):
    """Pooled kept samples of config.n_chains chains for one replication."""
    sampler = replace(config.sampler, seed=config.seed, progress=False)
    if sigma is not None:
        sampler = replace(sampler, covariance_mode='fixed')
    runs = run_chains(instance.data, instance.groups, hp, sampler, config.n_chains,
                      workers=1, sigma=sigma, replication=index)
    samples = [sample for run in runs for sample in run.samples]
    return samples, [run.diagnostics for run in runs]


def _contraction_replication(config, n, index):
    started = time.perf_counter()
    rng = np.random.default_rng(derive_seed(config.seed, index))
    instance = generate_data(replace(config.data, n=n), rng)
    data, groups = instance.data, instance.groups
    hp = config.prior.hyper_params(data.X, groups, data.d)
    samples, diagnostics = _posterior(config, instance, hp, index)
    losses = [recovery_report(sample.values, instance.beta0, data.X, groups) for sample in samples]
    rates = theoretical_rates(n, groups.G, data.d, groups.p_max, instance.support0.s, config.constants)
    key, _ = modal_support(samples)
    return dict(
        n=n,
        replication=index,
        prediction_loss=float(np.mean([loss.prediction for loss in losses])) / n,
        frobenius_loss=float(np.mean([loss.frobenius for loss in losses])),
        l21_loss=float(np.mean([loss.l21 for loss in losses])),
        covariance_loss=float(np.mean([covariance_loss(sample.sigma(), instance.sigma0) for sample in samples])),
        eps_n_sq=rates.eps_n ** 2,
        mean_s=float(sum(s * freq for s, freq in effective_dimension(samples).items())),
        modal_match=key == instance.support0.key(),
        beta_acceptance=float(np.mean([diag.acceptance.get('beta', np.nan) for diag in diagnostics])),
        ess_loglik=float(np.sum([diag.ess['loglik'] for diag in diagnostics])),
        in_b0=instance.in_b0,
        seconds=time.perf_counter() - started,
        )


def _selection_replication(config, multiple, index):
    started = time.perf_counter()
    rng = np.random.default_rng(derive_seed(config.seed, index))
    data_spec = config.data
    groups = data_spec.groups()
    X = rng.standard_normal((data_spec.n, groups.p))
    hp = config.prior.hyper_params(X, groups, data_spec.d)
    rates = design_rates(X, groups, data_spec.d, data_spec.s0, config.constants, lam_max=float(np.max(hp.lam)))
    signal = multiple * np.sqrt(rates.beta_min_threshold)
    instance = generate_data(replace(data_spec, signal=signal), rng, X=X, lam=hp.lam)
    samples, diagnostics = _posterior(config, instance, hp, index)
    key, frequency = modal_support(samples)
    modal = next(sample.support for sample in samples if sample.support.key() == key)
    report = selection_report(modal, instance.support0)
    truth = instance.support0.key()
    return dict(
        multiple=multiple,
        replication=index,
        signal=float(signal),
        beta_min_threshold=rates.beta_min_threshold,
        modal_match=report.exact_match,
        modal_frequency=frequency,
        posterior_s0=float(np.mean([sample.support.key() == truth for sample in samples])),
        missed=report.missed,
        false=report.false,
        in_b0=instance.in_b0,
        seconds=time.perf_counter() - started,
        )


def _bvm_replication(config, index):
    started = time.perf_counter()
    rng = np.random.default_rng(derive_seed(config.seed, index))
    instance = generate_data(config.data, rng)
    data, groups = instance.data, instance.groups
    hp = config.prior.hyper_params(data.X, groups, data.d)
    s_cap = config.s_cap
    if s_cap is None:
        s_star = dimension_threshold(max(data.n, 2), groups.G, data.d, groups.p_max, instance.support0.s)
        s_cap = ceil(config.constants.M2 * s_star)
    s_cap = min(int(s_cap), groups.G * data.d)
    mixture = build_mixture(data, groups, instance.sigma0, hp, s_cap=s_cap)
    misspecified = build_mixture(data, groups, config.misspecification * instance.sigma0, hp, s_cap=s_cap)
    samples, _ = _posterior(config, instance, hp, index, sigma=instance.sigma0)
    report = compare_to_chain(mixture, samples)
    component = mixture.find(instance.support0)
    rates = theoretical_rates(max(data.n, 2), groups.G, data.d, groups.p_max, instance.support0.s,
                              config.constants, x_norm=max(group_operator_norm(data.X, groups), 1e-12),
                              lam_max=float(np.max(hp.lam)))
    return dict(
        replication=index,
        s_cap=s_cap,
        n_components=len(mixture),
        tv=report.tv,
        tv_misspecified=compare_to_chain(misspecified, samples).tv,
        weight_s0=float(np.exp(component.log_weight)) if component is not None else 0.0,
        mixture_top_is_s0=mixture.top().support.key() == instance.support0.key(),
        chain_top_frequency=report.top_chain_frequency,
        small_lambda_index=rates.small_lambda_index,
        delta_n=rates.delta_n,
        seconds=time.perf_counter() - started,
        )


def _check(rows, check, parameter, statistic, threshold, passed):
    rows.append(dict(check=check, parameter=str(parameter), statistic=float(statistic),
                     threshold=float(threshold), passed=bool(passed)))


def _prior_checks(config):
    rng = np.random.default_rng(derive_seed(config.seed, 0))
    rows = []
    _check(rows, 'slab constant a_1 = 2', 1, abs(slab_norm_const(1) - 2.0), 1e-10,
           abs(slab_norm_const(1) - 2.0) <= 1e-10)
    _check(rows, 'slab constant a_2 = sqrt(2 pi)', 2, abs(slab_norm_const(2) - np.sqrt(2 * np.pi)), 1e-10,
           abs(slab_norm_const(2) - np.sqrt(2 * np.pi)) <= 1e-10)
    for m in (1, 2, 3):
        for lam in (0.5, 1.0, 2.0):
            mass, _ = slab_mass_estimate(m, lam, rng, config.slab_draws)
            _check(rows, 'slab mass', f'm={m}, lam={lam}', abs(mass - 1.0), 0.01, abs(mass - 1.0) <= 0.01)
    for m in (1, 2, 5):
        lam = 1.0
        draws = sample_slab([m] * config.radius_draws, lam, rng).reshape(config.radius_draws, m)
        result = stats.kstest(np.linalg.norm(draws, axis=1), 'gamma', args=(m, 0, 1.0 / lam))
        _check(rows, 'slab radius ~ Gamma(p_j, lam)', f'm={m}', result.pvalue, 0.01, result.pvalue >= 0.01)

    # prior-only chain: no rows, G = 3 singleton groups, one response
    groups = GroupStructure.equal(3, 1)
    data = Dataset.empty(groups.p, 1)
    hp = HyperParams.default(data.X, groups, 1)
    thin = 50
    sampler = replace(config.sampler, iterations=config.prior_check_iterations, burn_in=1_000, thin=thin,
                      covariance_mode='eigen', birth_proposal='prior', seed=config.seed, progress=False)
    run = run_chains(data, groups, hp, sampler, 1, replication=0)[0]
    sizes = np.array([sample.support.s for sample in run.samples])
    expected = np.exp(dimension_prior_table(groups.G, 1, 0, groups.p_max, hp.dim_exponent))
    observed = np.bincount(sizes, minlength=len(expected)) / len(sizes)
    tv = 0.5 * float(np.abs(observed - expected).sum())
    _check(rows, 'prior-only dimension law', 'G=3, d=1', tv, 0.02, tv <= 0.02)
    eigenvalues = np.array([sample.D[0] for sample in run.samples])
    law = stats.invgauss(hp.ig_mean / hp.ig_shape, scale=hp.ig_shape)
    result = stats.kstest(eigenvalues, law.cdf)
    _check(rows, 'prior-only eigenvalue ~ inverse Gaussian', 'd=1', result.pvalue, 0.01, result.pvalue >= 0.01)
    norms = np.concatenate([groups.block_norms(sample.values)[:, 0] for sample in run.samples])
    radii = norms[norms > 0]
    if len(radii):
        result = stats.kstest(radii, 'gamma', args=(1, 0, 1.0 / hp.lam[0]))
        _check(rows, 'prior-only slab radius', 'p_j=1', result.pvalue, 0.01, result.pvalue >= 0.01)
    return rows


def _wishart_tail_checks(config):
    rows = []
    for case_index, (nu, d) in enumerate(config.wishart_cases):
        rng = np.random.default_rng(derive_seed(config.seed, case_index))
        psi = np.eye(d)
        pilot = np.linalg.eigvalsh(sample_wishart(nu, psi, rng, size=2_000))
        medians = np.median(pilot, axis=0)
        a = 0.5 * medians
        report = wishart_tail_bounds(nu, psi, t1=2.0 * nu * d, t2=0.5 * medians[0], t3=1.0, a=a,
                                     rng=rng, n_draws=config.wishart_draws)
        bounds = report.bounds
        for event in ('upper', 'lower'):
            _check(rows, f'wishart {event} tail', f'nu={nu}, d={d}', report.empirical[event],
                   bounds[event], report.empirical[event] <= bounds[event])
        _check(rows, 'wishart eigenvalue band', f'nu={nu}, d={d}', report.empirical['band'],
               bounds['band'], report.empirical['band'] >= bounds['band'])
    return rows


class ExperimentHandler:
    """Runs one scenario of an ExperimentConfig and assembles its RunReport."""

    def __init__(self, config):
        self.config = config
        self.scenarios = {
            'contraction': self._run_contraction,
            'selection': self._run_selection,
            'bvm-compare': self._run_bvm_compare,
            'prior-checks': self._run_prior_checks,
            'wishart-tails': self._run_wishart_tails,
            }

    def run(self):
        config = self.config
        logger.info('experiment %s: %d replications, seed %d, %d workers',
                    config.scenario, config.replications, config.seed, config.workers)
        started = time.perf_counter()
        rows, rates = self.scenarios[config.scenario]()
        frame = pd.DataFrame(rows)
        aggregates, table = aggregate(config.scenario, frame)
        report = RunReport(
            scenario=config.scenario,
            rows=frame,
            aggregates=aggregates,
            table=table,
            rates=rates,
            timings=dict(total_seconds=time.perf_counter() - started),
            config=config.to_dict(),
            )
        logger.info('experiment %s finished in %.1f s: %s', config.scenario,
                    report.timings['total_seconds'], aggregates)
        return report

    def _replicate(self, function, tasks):
        """Run function(config, *task) for every task through joblib; errors carry the index."""
        config = self.config
        tasks = list(tasks)
        results = Parallel(n_jobs=config.workers, return_as='generator')(
            delayed(_guarded)(function, config, task) for task in tasks
            )
        if config.progress:
            # the bar advances as replications finish
            results = tqdm(results, total=len(tasks), desc=config.scenario)
        return list(results)

    def _run_contraction(self):
        R = self.config.replications
        tasks = [(n, arm * R + r) for arm, n in enumerate(self.config.sample_sizes) for r in range(R)]
        rows = self._replicate(_contraction_replication, tasks)
        data_spec = self.config.data
        groups = data_spec.groups()
        rates = {int(n): theoretical_rates(n, groups.G, data_spec.d, groups.p_max, data_spec.s0, self.config.constants).to_dict()
                 for n in self.config.sample_sizes}
        return rows, rates

    def _run_selection(self):
        R = self.config.replications
        tasks = [(multiple, arm * R + r) for arm, multiple in enumerate(self.config.signal_multiples)
                 for r in range(R)]
        rows = self._replicate(_selection_replication, tasks)
        data_spec = self.config.data
        groups = data_spec.groups()
        rates = theoretical_rates(max(data_spec.n, 2), groups.G, data_spec.d, groups.p_max, data_spec.s0,
                                  self.config.constants).to_dict()
        return rows, rates

    def _run_bvm_compare(self):
        rows = self._replicate(_bvm_replication, [(r,) for r in range(self.config.replications)])
        return rows, {}

    def _run_prior_checks(self):
        return _prior_checks(self.config), {}

    def _run_wishart_tails(self):
        return _wishart_tail_checks(self.config), {}


def _guarded(function, config, task):
    index = task[-1]
    try:
        return function(config, *task)
    except Exception as error:
        raise ReplicationError(config.scenario, index, error) from error


def run_experiment(config):
    return ExperimentHandler(config).run()
