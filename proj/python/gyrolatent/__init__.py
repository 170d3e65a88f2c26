"""Constant-curvature latent models for texture anomaly detection."""

import json

from ._core import (
    ConfigError,
    DegenerateError,
    DomainError,
    EmptyInputError,
    Error,
    IngestError,
    IoError,
    NumericError,
    RegimeError,
    ShapeError,
    SingularityError,
    StateError,
    SvddModel,
    VaeModel,
    conformal_factor,
    distance,
    exp_map,
    expmap0,
    gyroplane_feature,
    hyperplane_distance,
    karcher_mean,
    kl_mc,
    log_map,
    logmap0,
    mobius_add,
    mobius_scalar,
    nearest_rank,
    roc_auc,
    wn_log_prob,
    wn_sample,
)
from . import _core

__version__ = "0.1.0"


def generate_synthetic(spec=None, **kwargs):
    """Return (images, masks, labels, ids) for a synthetic texture spec."""
    spec = dict(spec or {}, **kwargs)
    return _core.generate_synthetic(json.dumps(spec))


def run(config):
    """Run a task described by a config dict; returns (exit_code, metrics)."""
    code, metrics = _core.run_json(json.dumps(config))
    return code, json.loads(metrics)
