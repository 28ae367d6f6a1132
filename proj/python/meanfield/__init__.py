"""Python interface to the meanfield C++ core.

Structured inputs (kernel specs, simulation configs, grid specs, hierarchy
parameters) are plain dicts with the same fields as the JSON config files.
"""

import json

import numpy as np

from . import _core
from ._core import ConfigError, Error, NumericalError

__all__ = [
    "ConfigError",
    "Error",
    "NumericalError",
    "bounds_report",
    "estimate_marginal",
    "existence_time",
    "final_marginal_bound",
    "induction_bound",
    "kernel_force",
    "kernel_potential",
    "lambda_min",
    "preset",
    "run_cli",
    "run_ensemble",
    "solve_vpfp_1d",
]

lambda_min = _core.lambda_min
existence_time = _core.existence_time
final_marginal_bound = _core.final_marginal_bound
induction_bound = _core.induction_bound


def kernel_potential(spec, r):
    return _core.kernel_potential(json.dumps(spec), np.atleast_1d(np.asarray(r, dtype=float)))


def kernel_force(spec, r):
    return _core.kernel_force(json.dumps(spec), np.atleast_1d(np.asarray(r, dtype=float)))


def run_ensemble(config, replicas, law=None):
    """Returns times and positions/velocities shaped (replicas, snapshots, N, d)."""
    return _core.run_ensemble(json.dumps(config), replicas, json.dumps(law or {}))


def estimate_marginal(config, replicas, k, time, grid, law=None):
    out = _core.estimate_marginal(json.dumps(config), replicas, json.dumps(law or {}), k, time, json.dumps(grid))
    out["spec"] = json.loads(out["spec"])
    return out


def solve_vpfp_1d(kernel, nx, nv, v_max, velocity_std, perturbation, mode, sigma, t_end, dt):
    """Landau-type initial data; returns (f[nx, nv], solver report)."""
    f, report = _core.solve_vpfp_1d(
        json.dumps(kernel), nx, nv, v_max, velocity_std, perturbation, mode, sigma, t_end, dt
    )
    return f, json.loads(report)


def bounds_report(params):
    return json.loads(_core.bounds_report(json.dumps(params)))


def preset(name):
    return json.loads(_core.preset(name))


def run_cli(*args):
    """Runs the command-line tool in process; returns (exit code, stdout, stderr)."""
    return _core.run_cli([str(a) for a in args])
