"""Event-triggered output feedback simulator."""

import json
import sys

from ._core import (
    ConfigError,
    DivergenceError,
    EtsimError,
    ExperimentFailure,
    InvalidInputError,
    NoSolutionError,
    gain_summary,
    is_hurwitz,
    main,
    render_config,
    sensitivity_margin,
    simulate,
    solve_lyapunov,
    spectral_norm,
    time_regulation_dwell,
)
from ._core import feasibility_json as _feasibility_json
from ._core import run_ensemble as _run_ensemble


def run_ensemble(path, overrides=(), replicas=None, workers=0):
    """Run an ensemble from a manifest; the summary comes back as a dict."""
    res = _run_ensemble(path, list(overrides), replicas, workers)
    res["summary"] = json.loads(res["summary"])
    return res


def check_gains(path, overrides=()):
    """Margin and recipe feasibility reports for the manifest's gains."""
    return json.loads(_feasibility_json(path, list(overrides)))


def cli():
    sys.exit(main(sys.argv[1:]))


__all__ = [
    "ConfigError",
    "DivergenceError",
    "EtsimError",
    "ExperimentFailure",
    "InvalidInputError",
    "NoSolutionError",
    "check_gains",
    "gain_summary",
    "is_hurwitz",
    "main",
    "render_config",
    "run_ensemble",
    "sensitivity_margin",
    "simulate",
    "solve_lyapunov",
    "spectral_norm",
    "time_regulation_dwell",
]
