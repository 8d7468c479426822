"""LICQ and KKT multiplier diagnostics for AC optimal power flow.

States are flat numpy arrays in (pg, qg, v, theta) order. Report-style
results come back as plain dicts.
"""

import json

from . import _core
from ._core import (
    Case,
    Error,
    InfeasibleError,
    InputError,
    PowerFlowError,
    build_ybus,
    builtin_case,
    builtin_point,
    kkt_residual,
    load_case,
    load_case_file,
    newton_pf,
    param_jacobian,
    pf_jacobian,
    pf_residual,
)

__all__ = [
    "Case",
    "Error",
    "InfeasibleError",
    "InputError",
    "PowerFlowError",
    "build_ybus",
    "builtin_case",
    "builtin_point",
    "check_rank_hypothesis",
    "kkt_residual",
    "kkt_solve",
    "licq_check",
    "load_case",
    "load_case_file",
    "newton_pf",
    "param_jacobian",
    "pf_jacobian",
    "pf_residual",
    "run_genericity_experiment",
    "tangency_escape_probe",
]


def licq_check(case, x, **tol):
    return json.loads(_core.licq_check(case, x, **tol))


def kkt_solve(case, x, **tol):
    return json.loads(_core.kkt_solve(case, x, **tol))


def check_rank_hypothesis(case, model, x):
    return json.loads(_core.check_rank_hypothesis(case, model, x))


def run_genericity_experiment(case, model="load", trials=100, seed=0, threads=1):
    return json.loads(_core.run_genericity_experiment(case, model, trials, seed, threads))


def tangency_escape_probe(alpha, deltas, param_index=1):
    return json.loads(_core.tangency_escape_probe(alpha, list(deltas), param_index))
