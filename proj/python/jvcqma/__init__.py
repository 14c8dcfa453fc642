"""Jackknife model averaging of varying-coefficient quantile regressions."""

import json

from ._core import (
    AveragedModel,
    DataError,
    Error,
    InvalidArgument,
    StaleModel,
    UnderdeterminedLocalFit,
    __version__,
    check_loss,
    fit,
    load_csv,
    quantile_adjust_factor,
    simulate,
    solve_simplex_weights,
    solve_weighted_qr,
)
from ._core import evaluate_simulation as _evaluate_simulation


def evaluate_simulation(**kwargs):
    """Run the replicated comparison and return (report, weights) as dicts."""
    report, weights = _evaluate_simulation(**kwargs)
    return json.loads(report), json.loads(weights)


__all__ = [
    "AveragedModel",
    "DataError",
    "Error",
    "InvalidArgument",
    "StaleModel",
    "UnderdeterminedLocalFit",
    "__version__",
    "check_loss",
    "evaluate_simulation",
    "fit",
    "load_csv",
    "quantile_adjust_factor",
    "simulate",
    "solve_simplex_weights",
    "solve_weighted_qr",
]
