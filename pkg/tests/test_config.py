# -*- coding: utf-8 -*-
import json

import numpy as np
import pytest

from harness.config import (
    SCENARIOS,
    DataSpec,
    ExperimentConfig,
    PriorSpec,
    apply_overrides,
    config_from_dict,
    config_schema,
    load_config,
    )
from src.domain_types import GroupStructure, HyperParams


def test_defaults():
    config = ExperimentConfig()
    assert config.scenario == 'contraction'
    assert config.data.n == 200 and config.data.d == 2
    assert config.sampler.birth_proposal == 'residual'
    assert config.sampler.iterations == 20_000
    assert config.constants.M1 == 1.0
    assert config.prior_check_iterations == 1_000_000


def test_partial_document_keeps_defaults():
    config = config_from_dict({'scenario': 'selection', 'data': {'n': 50}, 'sampler': {'iterations': 100}})
    assert config.scenario == 'selection'
    assert config.data.n == 50 and config.data.G == 20
    assert config.sampler.iterations == 100 and config.sampler.burn_in == 5_000
    assert config.sampler.birth_proposal == 'residual'
    assert config.signal_multiples == (2.0, 0.1)


def test_lists_become_tuples():
    config = config_from_dict({'sample_sizes': [50, 100], 'wishart_cases': [[10, 3]],
                               'data': {'group_sizes': [1, 2, 3]}})
    assert config.sample_sizes == (50, 100)
    assert config.wishart_cases == ((10, 3),)
    assert config.data.groups() == GroupStructure((1, 2, 3))


@pytest.mark.parametrize('document, message', [
    ({'replicates': 3}, 'unknown keys'),
    ({'data': {'size': 3}}, r'config\.data: unknown keys'),
    ({'data': 3}, 'expected an object'),
    ({'scenario': 'nope'}, 'unknown scenario'),
    ({'data': {'s0': 100}}, 's0'),
    ({'data': {'b1': 3.0, 'b2': 1.0}}, 'b1'),
    ])
def test_invalid_documents(document, message):
    with pytest.raises(ValueError, match=message):
        config_from_dict(document)


def test_load_config_reports_the_line(tmp_path):
    path = tmp_path / 'config.json'
    path.write_text('{\n  "seed": 1,\n  "out": \n}\n')
    with pytest.raises(ValueError, match='line 4'):
        load_config(path)
    path.write_text(json.dumps({'seed': 7, 'prior': {'lam_scale': 0.5}}))
    config = load_config(path)
    assert config.seed == 7 and config.prior.lam_scale == 0.5


def test_overrides_take_precedence():
    config = apply_overrides(ExperimentConfig(seed=1, workers=2), seed=5, workers=None, scenario='bvm-compare')
    assert (config.seed, config.workers, config.scenario) == (5, 2, 'bvm-compare')


def test_prior_spec_hyper_params(rng):
    groups = GroupStructure.equal(4, 1)
    X = rng.standard_normal((30, 4))
    default = HyperParams.default(X, groups, 2)
    hp = PriorSpec(lam_scale=0.5).hyper_params(X, groups, 2)
    np.testing.assert_allclose(hp.lam, default.lam * 0.5)
    fixed = PriorSpec(lam=3.0, dim_exponent=2.0).hyper_params(X, groups, 2)
    np.testing.assert_allclose(fixed.lam, [3.0, 3.0])
    assert fixed.dim_exponent == 2.0
    with pytest.raises(ValueError):
        PriorSpec(lam=-1.0)


def test_design_csv_needs_a_path():
    with pytest.raises(ValueError, match='design_path'):
        DataSpec(design='csv')


def test_schema_lists_defaults_and_scenarios():
    schema = config_schema()
    properties = schema['properties']
    assert properties['scenario']['enum'] == list(SCENARIOS)
    assert properties['replications']['default'] == 20
    assert properties['prior_check_iterations']['default'] == 1_000_000
    assert properties['data']['properties']['n']['default'] == 200
    assert properties['sampler']['properties']['iterations']['default'] == 20_000
    assert properties['sampler']['properties']['birth_proposal']['default'] == 'residual'
    assert schema['additionalProperties'] is False
    json.dumps(schema)
