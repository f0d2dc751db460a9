"""Python access to the stochtr library and its experiment lab.

Grid values are numpy arrays: shape (n,) in 1D and (ny, nx) in 2D.
"""

import json

from ._stochtr import (
    ConfigError,
    Datum,
    DomainError,
    Drift,
    Grid,
    Kernel,
    LookupError,
    ResolutionError,
    UnsupportedError,
    ValidationFailed,
    __version__,
    commutator_study,
    convolve,
    datum,
    drift,
    drift_names,
    feynman_kac,
    heat_exact,
    minimize_lambda_rank_one,
    shear_branches,
    solve_fd,
    stable_dt,
)
from . import _stochtr


def experiments():
    """Registered lab experiments as dicts with id, description and anchor."""
    return [dict(id=i, description=d, anchor=a) for i, d, a in _stochtr.lab_experiments()]


def default_config(experiment, seed=1):
    return json.loads(_stochtr.lab_default_config(experiment, seed))


def validate(config):
    """List of diagnostic strings; empty when the config is runnable."""
    return [text for _, text, _ in _stochtr.lab_validate(json.dumps(config))]


def run(config, out):
    """Run an experiment config, writing CSVs and report.json into `out`. Returns the report."""
    return json.loads(_stochtr.lab_run(json.dumps(config), str(out)))
