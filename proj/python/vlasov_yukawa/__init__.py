"""Screened Vlasov-Poisson simulator and inequality certification suite."""

import json

from ._core import (
    ConvergenceError,
    DomainError,
    InitialData,
    RunConfig,
    RunResult,
    TruncationError,
    auto_tune_amplitude,
    binom_phi_sums,
    certify_initial_data,
    damping_bound,
    free_stream_suite,
    free_streaming_density,
    free_streaming_exact,
    gamma,
    grid,
    tuple_bounds_suite,
    time_integral_suite,
    binomial_sums_suite,
    comparison_suite,
    make_initial_data,
    oracle_compare,
    partition_count,
    phi,
    run,
    screened_field_suite,
    solve_potential,
    t1_margin,
)


def config(path=None, **overrides):
    """RunConfig from an optional key = value file, then keyword overrides."""
    cfg = RunConfig.load(str(path)) if path is not None else RunConfig()
    for key, value in overrides.items():
        cfg.set(key, value)
    cfg.validate()
    return cfg


def report(result):
    """The run report of a RunResult as a dict."""
    return json.loads(result.report_json())


__all__ = [name for name in dir() if not name.startswith("_")]
