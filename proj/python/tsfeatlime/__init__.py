"""Feature-based local surrogate explanations for univariate forecasters."""

import json

from ._core import (
    ConfigError,
    Error,
    Forecaster,
    benchmark_series,
    decompose,
    euclidean_distance,
    expanding_window,
    feature_labels,
    feature_row,
    fidelity,
    fit_wls,
    generate_samples,
    kernel_weights,
    lag,
    make_forecaster,
    mann_whitney_p_value,
    mann_whitney_u,
    rolling_window,
)
from . import _core


def explain(window, model, **kwargs):
    """Explanation for `window` as a dict. `model` is a Forecaster or a callable."""
    return json.loads(_core.explain_json(list(window), model, **kwargs))


def evaluate_fidelity(queries, model, **kwargs):
    """Fidelity report over `queries` as a dict."""
    return json.loads(_core.evaluate_fidelity_json([list(q) for q in queries], model, **kwargs))


__all__ = [
    "ConfigError",
    "Error",
    "Forecaster",
    "benchmark_series",
    "decompose",
    "euclidean_distance",
    "evaluate_fidelity",
    "expanding_window",
    "explain",
    "feature_labels",
    "feature_row",
    "fidelity",
    "fit_wls",
    "generate_samples",
    "kernel_weights",
    "lag",
    "make_forecaster",
    "mann_whitney_p_value",
    "mann_whitney_u",
    "rolling_window",
]
