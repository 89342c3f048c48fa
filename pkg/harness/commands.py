# -*- coding: utf-8 -*-
"""
Subcommands. Each command registers its own parser and runs on the parsed
arguments; the app only dispatches.
"""
import json
import logging
import os
from dataclasses import replace

import numpy as np
import pandas as pd

from harness.config import SCENARIOS, apply_overrides, config_from_dict, config_schema, load_config
from harness.data_handler import (
    DATA_FILES,
    generate_data,
    load_covariance,
    load_dataset,
    noise_report,
    save_instance,
    write_json,
    write_matrix,
    )
from harness.experiment_handler import ExperimentHandler
from src.bvm import build_mixture, compare_to_chain, export_mixture, load_mixture
from src.metrics import effective_dimension, modal_support
from src.sampler import derive_seed, read_chain, run_chains

logger = logging.getLogger(__name__)


class BaseCommand:
    """Base subcommand with the shared --config/--seed/--out/--workers flags"""
    name = None
    help = None

    def __init__(self, subparsers):
        self.parser = subparsers.add_parser(self.name, help=self.help, description=self.help)
        self.parser.set_defaults(command=self)
        self.create_arguments()

    def create_arguments(self):
        pass

    def add_common_arguments(self):
        self.parser.add_argument('--config', help='experiment configuration (JSON)')
        self.parser.add_argument('--seed', type=int, help='master seed, overrides the file value')
        self.parser.add_argument('--out', help='output directory, overrides the file value')
        self.parser.add_argument('--workers', type=int, help='parallel workers, overrides the file value')
        self.parser.add_argument('--no-progress', action='store_true', help='hide progress bars')

    def add_data_arguments(self):
        self.parser.add_argument('--data', required=True,
                                 help=f"directory holding {DATA_FILES['X']}, {DATA_FILES['Y']} "
                                      f"and {DATA_FILES['groups']}")

    def load_config(self, args, scenario=None):
        """File values merged over defaults, then command-line overrides."""
        config = load_config(args.config) if args.config else config_from_dict({})
        config = apply_overrides(config, seed=args.seed, out=args.out, workers=args.workers,
                                 scenario=scenario)
        return replace(config, progress=not args.no_progress)

    @staticmethod
    def load_data(args):
        directory = args.data
        return load_dataset(
            os.path.join(directory, DATA_FILES['X']),
            os.path.join(directory, DATA_FILES['Y']),
            os.path.join(directory, DATA_FILES['groups']),
            )

    def run(self, args):
        raise NotImplementedError


class GenerateCommand(BaseCommand):
    """Draw a synthetic instance from the config's data section and write it as CSV"""
    name = 'generate'
    help = 'draw a synthetic instance and write X, Y, groups, beta0 and sigma0'

    def create_arguments(self):
        self.add_common_arguments()

    def run(self, args):
        config = self.load_config(args)
        rng = np.random.default_rng(derive_seed(config.seed, 0))
        instance = generate_data(config.data, rng)
        save_instance(config.out, instance.data, instance.groups, instance.beta0, instance.sigma0)
        write_json(os.path.join(config.out, 'instance.json'), dict(
            support0=[list(pair) for pair in instance.support0.pairs()],
            s0=instance.support0.s,
            beta_bar=instance.beta_bar,
            in_b0=instance.in_b0,
            seed=config.seed,
            data=config.to_dict()['data'],
            **noise_report(instance),
            ))
        return instance


class FitCommand(BaseCommand):
    """Run the sampler on data files; chains go to JSONL, summaries to JSON and CSV"""
    name = 'fit'
    help = 'run MCMC chains on a data directory'

    def create_arguments(self):
        self.add_common_arguments()
        self.add_data_arguments()
        self.parser.add_argument('--chains', type=int, help='number of chains (default: config n_chains)')
        self.parser.add_argument('--sigma', help="covariance CSV held fixed in 'fixed' covariance mode")

    def run(self, args):
        config = self.load_config(args)
        data, groups = self.load_data(args)
        n_chains = args.chains or config.n_chains
        sigma = load_covariance(args.sigma, data.d) if args.sigma else None
        sampler = replace(config.sampler, seed=config.seed, progress=config.progress and config.workers == 1)
        if sigma is not None:
            sampler = replace(sampler, covariance_mode='fixed')
        hp = config.prior.hyper_params(data.X, groups, data.d)
        os.makedirs(config.out, exist_ok=True)
        paths = [os.path.join(config.out, f'chain_{c}.jsonl') for c in range(n_chains)]
        runs = run_chains(data, groups, hp, sampler, n_chains, workers=config.workers,
                          paths=paths, sigma=sigma)

        samples = [sample for run in runs for sample in run.samples]
        summary = dict(
            n=data.n, p=data.p, d=data.d, group_sizes=list(groups.group_sizes),
            lam=hp.lam, seed=config.seed, chains=paths,
            diagnostics=[run.diagnostics.to_dict() for run in runs],
            )
        if samples:
            key, frequency = modal_support(samples)
            summary.update(
                modal_support=[list(column) for column in key],
                modal_frequency=frequency,
                effective_dimension={str(s): freq for s, freq in effective_dimension(samples).items()},
                posterior_mean_sigma=np.mean([sample.sigma() for sample in samples], axis=0),
                )
            inclusion = np.mean([groups.block_norms(sample.values) > 0 for sample in samples], axis=0)
            pd.DataFrame(inclusion, columns=[f'response_{k}' for k in range(data.d)]).rename_axis(
                'group').to_csv(os.path.join(config.out, 'inclusion.csv'))
            write_matrix(os.path.join(config.out, 'posterior_mean.csv'),
                         np.mean([sample.values for sample in samples], axis=0))
        write_json(os.path.join(config.out, 'summary.json'), summary)
        logger.info('fit wrote %d chains to %s', n_chains, config.out)
        return runs


class BvmCommand(BaseCommand):
    """Build the limiting mixture posterior under a known covariance and export it"""
    name = 'bvm'
    help = 'enumerate supports and export the Gaussian mixture posterior'

    def create_arguments(self):
        self.add_common_arguments()
        self.add_data_arguments()
        self.parser.add_argument('--sigma', required=True, help='known noise covariance CSV (d x d)')
        self.parser.add_argument('--s-cap', type=int, help='largest support size to enumerate')

    def run(self, args):
        config = self.load_config(args)
        data, groups = self.load_data(args)
        sigma0 = load_covariance(args.sigma, data.d)
        hp = config.prior.hyper_params(data.X, groups, data.d)
        s_cap = args.s_cap if args.s_cap is not None else config.s_cap
        mixture = build_mixture(data, groups, sigma0, hp, s_cap=s_cap, workers=config.workers)
        os.makedirs(config.out, exist_ok=True)
        export_mixture(mixture, os.path.join(config.out, 'mixture.json'))
        return mixture


class CompareCommand(BaseCommand):
    """Total variation and moment checks between a chain file and a mixture export"""
    name = 'compare'
    help = 'compare JSONL chains against a mixture export'

    def create_arguments(self):
        self.parser.add_argument('--mixture', required=True, help='mixture.json written by bvm')
        self.parser.add_argument('--chain', required=True, nargs='+', help='chain JSONL file(s) written by fit')
        self.parser.add_argument('--out', default='.', help='output directory')

    def run(self, args):
        mixture = load_mixture(args.mixture)
        samples = [sample for path in args.chain for sample in read_chain(path, mixture.groups, mixture.d)]
        report = compare_to_chain(mixture, samples)
        os.makedirs(args.out, exist_ok=True)
        write_json(os.path.join(args.out, 'comparison.json'), report.to_dict())
        logger.info('support total variation %.4f over %d samples', report.tv, report.n_samples)
        return report


class ExperimentCommand(BaseCommand):
    """Run a simulation scenario and save its report and tables"""
    name = 'experiment'
    help = 'run a simulation scenario'

    def create_arguments(self):
        self.parser.add_argument('scenario', choices=SCENARIOS)
        self.add_common_arguments()

    def run(self, args):
        config = self.load_config(args, scenario=args.scenario)
        report = ExperimentHandler(config).run()
        report.save(config.out)
        return report


class SchemaCommand(BaseCommand):
    """Print the experiment configuration schema"""
    name = 'schema'
    help = 'print the JSON schema of the experiment configuration'

    def run(self, args):
        print(json.dumps(config_schema(), indent=2))


COMMANDS = (GenerateCommand, FitCommand, BvmCommand, CompareCommand, ExperimentCommand, SchemaCommand)
