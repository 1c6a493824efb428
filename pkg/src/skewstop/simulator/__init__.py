"""Monte Carlo engine used to check analytic values independently.

Paths follow the skew random walk on the grid dx*Z (from the origin: up with
probability beta; elsewhere a fair coin), with time dx^2 per step.  Exact draws of
the transition law are available through inverse-CDF sampling.
"""

from .engine import (
    BIAS_C,
    MCEstimate,
    VerifyReport,
    VerifyRow,
    WalkConfig,
    exact_sample,
    exact_step,
    perturb_stop_set,
    simulate_stops,
    skew_walk_stop,
    verify_value,
    walk_positions,
    z_score,
)

__all__ = [
    "BIAS_C",
    "MCEstimate",
    "VerifyReport",
    "VerifyRow",
    "WalkConfig",
    "exact_sample",
    "exact_step",
    "perturb_stop_set",
    "simulate_stops",
    "skew_walk_stop",
    "verify_value",
    "walk_positions",
    "z_score",
]
