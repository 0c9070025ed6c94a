"""Variant-specific vaccine effect estimation.

Thin wrappers over the compiled core. Functions returning structured results
decode them into plain dictionaries.
"""

import json as _json

from . import _core
from ._core import (
    DataError,
    DegeneracyError,
    SievekitError,
    UsageError,
    cox_fit,
    cumulative_incidence,
    eet_trinomial_ci,
    f_quantile,
    multi_exposure_probability,
    normal_quantile,
    run_cli,
    sample_events as _sample_events,
    sample as _sample,
    version,
)

__all__ = [
    "DataError",
    "DegeneracyError",
    "SievekitError",
    "UsageError",
    "acece_ratio_bounds",
    "builtin_scenario",
    "cce",
    "ccs",
    "cox_fit",
    "cse_cox",
    "cse_k_nonparametric",
    "cumulative_incidence",
    "eet",
    "eet_trinomial_ci",
    "eie",
    "f_quantile",
    "h0w_test",
    "multi_exposure_probability",
    "normal_quantile",
    "oracle",
    "rr",
    "run_cli",
    "sample",
    "sample_events",
    "strong_null_test",
    "ve_ratio_bounds",
    "version",
    "windowed_hazard_ratio",
]


def _decoded(fn):
    def wrapper(*args, **kwargs):
        return _json.loads(fn(*args, **kwargs))

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


rr = _decoded(_core.rr)
ccs = _decoded(_core.ccs)
cce = _decoded(_core.cce)
eie = _decoded(_core.eie)
eet = _decoded(_core.eet)
acece_ratio_bounds = _decoded(_core.acece_ratio_bounds)
ve_ratio_bounds = _decoded(_core.ve_ratio_bounds)
cse_cox = _decoded(_core.cse_cox)
cse_k_nonparametric = _decoded(_core.cse_k_nonparametric)
windowed_hazard_ratio = _decoded(_core.windowed_hazard_ratio)
strong_null_test = _decoded(_core.strong_null_test)
h0w_test = _decoded(_core.h0w_test)


def builtin_scenario(scenario_id):
    """Scenario definition as a dictionary."""
    return _json.loads(_core.builtin_scenario(scenario_id))


def _spec_text(spec):
    return spec if isinstance(spec, str) else _json.dumps(spec)


def oracle(spec):
    """Analytic oracle values for a scenario id or scenario dictionary."""
    if isinstance(spec, str) and not spec.lstrip().startswith("{"):
        spec = builtin_scenario(spec)
    return _json.loads(_core.oracle(_spec_text(spec)))


def sample(spec, n, seed, lanes=1):
    """Draw a time-fixed dataset; returns columns a, y, e."""
    if isinstance(spec, str) and not spec.lstrip().startswith("{"):
        spec = builtin_scenario(spec)
    return _sample(_spec_text(spec), n, seed, lanes)


def sample_events(spec, n, seed, lanes=1):
    """Draw a time-to-event dataset as (a, time, event) tuples."""
    if isinstance(spec, str) and not spec.lstrip().startswith("{"):
        spec = builtin_scenario(spec)
    return _sample_events(_spec_text(spec), n, seed, lanes)
