"""Alternating direction decomposition solvers for linearly coupled block problems."""

import json

from ._core import (
    DimensionError,
    Error,
    ParameterError,
    Problem,
    consensus_ratio,
    constraint_residual,
    criterion_A_threshold,
    criterion_B_threshold,
    g_norm_sq,
    gen_exchange,
    gen_lasso,
    gen_logreg_data,
    kkt_residual,
    lasso_problem,
    load_libsvm,
    logreg_consensus_problem,
    make_problem,
    objective,
    project_onto_W,
    project_onto_Wperp,
    soft_threshold,
    spectral_norm,
    write_libsvm,
)
from . import _core


def _config_text(config):
    if config is None:
        return "{}"
    if isinstance(config, str):
        return config
    return json.dumps(config)


def solve(problem, config=None, **options):
    """Run a solver on `problem`. Options are ExperimentConfig keys (solver, rho, c, ...)."""
    merged = dict(json.loads(_config_text(config)))
    merged.update(options)
    return _core.solve(problem, json.dumps(merged))


def run_experiment(config=None, **options):
    """Build an instance, solve it and write trace.csv / rate_report.json / summary.json."""
    merged = dict(json.loads(_config_text(config)))
    merged.update(options)
    result = _core.run_experiment(json.dumps(merged))
    result["rate_report"] = json.loads(result["rate_report"])
    return result


__all__ = [
    "DimensionError",
    "Error",
    "ParameterError",
    "Problem",
    "consensus_ratio",
    "constraint_residual",
    "criterion_A_threshold",
    "criterion_B_threshold",
    "g_norm_sq",
    "gen_exchange",
    "gen_lasso",
    "gen_logreg_data",
    "kkt_residual",
    "lasso_problem",
    "load_libsvm",
    "logreg_consensus_problem",
    "make_problem",
    "objective",
    "project_onto_W",
    "project_onto_Wperp",
    "run_experiment",
    "soft_threshold",
    "solve",
    "spectral_norm",
    "write_libsvm",
]
