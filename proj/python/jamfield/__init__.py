"""Jammer localization experiments: pathloss and ray-traced fields, CRB, MLE and APBM."""

import json

from ._core import (
    CONFIG_SCHEMA_VERSION,
    DegenerateGeometry,
    DimensionMismatch,
    ExperimentConfig,
    GeometryError,
    clamped_rss,
    clamped_rss_grad_theta,
    crb_2d,
    crb_table,
    dataset,
    fim_pathloss,
    mlp_parameter_count,
    raytrace_rss,
    run_sweep,
    sigma_from_inr,
)
from ._core import estimate as _estimate

__all__ = [
    "CONFIG_SCHEMA_VERSION",
    "DegenerateGeometry",
    "DimensionMismatch",
    "ExperimentConfig",
    "GeometryError",
    "clamped_rss",
    "clamped_rss_grad_theta",
    "crb_2d",
    "crb_table",
    "dataset",
    "estimate",
    "fim_pathloss",
    "mlp_parameter_count",
    "raytrace_rss",
    "run_sweep",
    "sigma_from_inr",
]


def estimate(config, realization=0, inr_db=20.0):
    """Run every configured estimator on one realization; returns report dicts."""
    return [json.loads(r) for r in _estimate(config, realization, inr_db)]
