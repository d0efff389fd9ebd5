"""Python bindings for the sslc2st two-sample testing library."""

import json

from ._core import (
    ShapeError,
    TrainingError,
    accuracy_threshold,
    csv_header,
    embedding_statistic,
    epsilon_hat_from_accuracy,
    ks_uniform_distance,
    mix_seed,
    normal_cdf,
    normal_quantile,
    objective_j,
    permutation_test,
    poisson_binomial_pmf,
    sample_hdgm,
    self_check,
    theoretical_power,
)
from . import _core

__all__ = [
    "ShapeError",
    "TrainingError",
    "accuracy_threshold",
    "csv_header",
    "default_config",
    "draw_trial_data",
    "embedding_statistic",
    "epsilon_hat_from_accuracy",
    "estimate",
    "ks_uniform_distance",
    "mix_seed",
    "normal_cdf",
    "normal_quantile",
    "objective_j",
    "permutation_test",
    "poisson_binomial_pmf",
    "run_trial",
    "sample_hdgm",
    "self_check",
    "theoretical_power",
]


def default_config():
    """The default experiment configuration as a dict."""
    return json.loads(_core.default_config_json())


def _encode(config):
    return json.dumps(config if config is not None else {})


def draw_trial_data(config, trial_index=0):
    """(train_x, train_labels, test_x, test_labels) for one trial of `config`."""
    return _core.draw_trial_data(_encode(config), trial_index)


def run_trial(config, trial_index=0):
    """Runs one trial; keys missing from `config` take their defaults."""
    return _core.run_trial(_encode(config), trial_index)


def estimate(config, jobs=1):
    """Rejection rate over config["trials"] trials."""
    return _core.estimate(_encode(config), jobs)
