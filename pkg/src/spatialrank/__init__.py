"""Spatial-rank two-sample location tests for high-dimensional data.

The common entry points are re-exported here and imported on first use, so
``import spatialrank`` stays cheap and leaves thread settings to the caller.
"""
from importlib import import_module

__version__ = "0.1.0"

_EXPORTS = {
    "sr_test": "sr", "TestResult": "sr", "compute_tn": "sr", "compute_tn_fast": "sr",
    "compute_tn_exact": "sr", "trace_r2_within": "sr", "trace_r2_between": "sr", "sigma_hat2": "sr",
    "tr_test_q2": "q2", "q2_statistic": "q2",
    "spatial_sign": "core", "spatial_rank": "core", "spatial_ranks": "core",
    "estimate_diag_scale": "core", "DiagScale": "core", "FixedPointConfig": "core",
    "ScenarioSpec": "scenarios", "ShiftSpec": "scenarios", "scenario": "scenarios",
    "sample_scenario": "scenarios",
    "run_cell": "harness", "run_plan": "harness", "load_plan": "config",
}

__all__ = sorted(_EXPORTS)


def __getattr__(name):
    try:
        module = _EXPORTS[name]
    except KeyError:
        raise AttributeError(f"module 'spatialrank' has no attribute {name!r}") from None
    return getattr(import_module(f".{module}", __name__), name)
