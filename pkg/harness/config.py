# -*- coding: utf-8 -*-
"""
Experiment configuration: one JSON document merged over dataclass defaults.

    {
      "scenario": "contraction",
      "data": {"n": 200, "G": 20, "group_size": 2, "d": 2, "s0": 3, ...},
      "prior": {"lam_scale": 1.0, ...},
      "sampler": {"iterations": 20000, ...},
      "constants": {"M1": 1.0, ...},
      "replications": 20, "seed": 0, ...
    }

Missing keys keep their defaults; unknown keys are an error.
"""
import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from src.domain_types import GroupStructure, HyperParams
from src.metrics import RateConstants
from src.sampler import SamplerConfig

SCENARIOS = ('contraction', 'selection', 'bvm-compare', 'prior-checks', 'wishart-tails')


@dataclass(frozen=True)
class DataSpec:
    """Synthetic instance; defaults are the standard synthetic instance."""
    n: int = 200
    G: int = 20
    group_size: int = 2
    group_sizes: Optional[tuple] = None
    d: int = 2
    s0: int = 3
    signal: float = 1.0
    design: str = 'gaussian'
    design_path: Optional[str] = None
    sigma_law: str = 'rotation'
    b1: float = 0.5
    b2: float = 2.0

    def __post_init__(self):
        if self.group_sizes is not None:
            object.__setattr__(self, 'group_sizes', tuple(int(size) for size in self.group_sizes))
        G = self.G if self.group_sizes is None else len(self.group_sizes)
        if self.n < 0 or G < 1 or self.d < 1 or self.group_size < 1:
            raise ValueError(f'need n >= 0 and G, d, group_size >= 1; got n={self.n}, G={G}, d={self.d}')
        if self.s0 < 0 or self.s0 > G * self.d:
            raise ValueError(f's0 = {self.s0} must lie in 0..G d = {G * self.d}')
        if self.signal < 0:
            raise ValueError(f'signal magnitude must be nonnegative, got {self.signal}')
        if not 0 < self.b1 <= self.b2:
            raise ValueError(f'need 0 < b1 <= b2, got b1={self.b1}, b2={self.b2}')
        if self.design not in ('gaussian', 'csv'):
            raise ValueError(f"design must be 'gaussian' or 'csv', got {self.design!r}")
        if self.design == 'csv' and not self.design_path:
            raise ValueError("design 'csv' needs design_path")
        if self.sigma_law not in ('diagonal', 'rotation'):
            raise ValueError(f"sigma_law must be 'diagonal' or 'rotation', got {self.sigma_law!r}")

    def groups(self):
        if self.group_sizes is not None:
            return GroupStructure(self.group_sizes)
        return GroupStructure.equal(self.G, self.group_size)


@dataclass(frozen=True)
class PriorSpec:
    """
    Prior settings; lam=None takes the default rate from the design and
    lam_scale multiplies it (values below 1 move toward the small-lambda regime).
    """
    lam: Optional[float] = None
    lam_scale: float = 1.0
    dim_exponent: float = 1.0
    ig_mean: float = 1.0
    ig_shape: float = 1.0
    wishart_dof: Optional[float] = None

    def __post_init__(self):
        if self.lam is not None and self.lam <= 0:
            raise ValueError(f'lam must be positive, got {self.lam}')
        if self.lam_scale <= 0:
            raise ValueError(f'lam_scale must be positive, got {self.lam_scale}')

    def hyper_params(self, X, groups, d):
        hp = HyperParams.default(
            np.asarray(X), groups, d,
            dim_exponent=self.dim_exponent, ig_mean=self.ig_mean, ig_shape=self.ig_shape,
            wishart_dof=self.wishart_dof,
            )
        lam = hp.lam if self.lam is None else np.full(d, float(self.lam))
        return hp.with_lam(lam * self.lam_scale)


def experiment_sampler_defaults():
    return SamplerConfig(iterations=20_000, burn_in=5_000, thin=10, birth_proposal='residual')


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = 'contraction'
    data: DataSpec = field(default_factory=DataSpec)
    prior: PriorSpec = field(default_factory=PriorSpec)
    sampler: SamplerConfig = field(default_factory=experiment_sampler_defaults)
    constants: RateConstants = field(default_factory=RateConstants)
    replications: int = 20
    seed: int = 0
    out: str = 'results'
    workers: int = 1
    n_chains: int = 1
    progress: bool = False
    # contraction
    sample_sizes: tuple = (100, 200, 400)
    # selection: block norms as multiples of sqrt(beta-min threshold)
    signal_multiples: tuple = (2.0, 0.1)
    # bvm-compare
    s_cap: Optional[int] = None
    misspecification: float = 4.0
    # prior-checks
    prior_check_iterations: int = 1_000_000
    slab_draws: int = 1_000_000
    radius_draws: int = 100_000
    # wishart-tails
    wishart_cases: tuple = ((10, 3), (25, 5))
    wishart_draws: int = 10_000

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f'unknown scenario {self.scenario!r}; expected one of {SCENARIOS}')
        if self.replications < 1 or self.workers < 1 or self.n_chains < 1:
            raise ValueError('replications, workers and n_chains must be at least 1')
        if self.misspecification <= 0:
            raise ValueError(f'misspecification must be positive, got {self.misspecification}')
        object.__setattr__(self, 'sample_sizes', tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, 'signal_multiples', tuple(float(m) for m in self.signal_multiples))
        object.__setattr__(self, 'wishart_cases', tuple(tuple(int(v) for v in case) for case in self.wishart_cases))

    def to_dict(self):
        return asdict(self)


NESTED = ('data', 'prior', 'sampler', 'constants')


def _merge(base, values, where):
    '''Copy of the dataclass instance base with the document values replaced.'''
    if not isinstance(values, dict):
        raise ValueError(f'{where}: expected an object, got {type(values).__name__}')
    known = {item.name for item in fields(base)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ValueError(f'{where}: unknown keys {unknown}')
    merged = {}
    for key, value in values.items():
        if key in NESTED and isinstance(base, ExperimentConfig):
            value = _merge(getattr(base, key), value, f'{where}.{key}')
        elif isinstance(value, list):
            value = tuple(tuple(item) if isinstance(item, list) else item for item in value)
        merged[key] = value
    return replace(base, **merged)


def config_from_dict(values, where='config'):
    return _merge(ExperimentConfig(), values, where)


def load_config(path):
    with open(path, 'r', encoding='utf-8') as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as error:
            raise ValueError(f'{path}, line {error.lineno}: {error.msg}') from error
    return config_from_dict(document, where=str(path))


def apply_overrides(config, seed=None, out=None, workers=None, scenario=None):
    """Command-line flags take precedence over file values."""
    overrides = dict(seed=seed, out=out, workers=workers, scenario=scenario)
    return replace(config, **{key: value for key, value in overrides.items() if value is not None})


_JSON_TYPES = {bool: 'boolean', int: 'integer', float: 'number', str: 'string',
               tuple: 'array', dict: 'object'}


def _schema_for(instance):
    properties = {}
    for item in fields(instance):
        default = getattr(instance, item.name)
        if item.name in NESTED and isinstance(instance, ExperimentConfig):
            properties[item.name] = _schema_for(default)
            continue
        if default is None:
            kind = ['number', 'string', 'array', 'null']
        else:
            kind = _JSON_TYPES.get(type(default), 'string')
        properties[item.name] = {'type': kind, 'default': default}
    return {'type': 'object', 'additionalProperties': False, 'properties': properties}


def config_schema():
    """JSON schema of the experiment document, with every default."""
    schema = _schema_for(ExperimentConfig())
    schema['$schema'] = 'https://json-schema.org/draft/2020-12/schema'
    schema['title'] = 'experiment configuration'
    schema['properties']['scenario']['enum'] = list(SCENARIOS)
    return json.loads(json.dumps(schema, default=list))
