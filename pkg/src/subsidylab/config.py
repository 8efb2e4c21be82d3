"""Shared numerical defaults.

Every tolerance-sensitive decision (equilibrium membership, objective checks,
deduplication of thresholds) reads these values, so changing them here changes
the whole library consistently.
"""
import os

TOL = 1e-9
CAP_N = 20
PROFILE_CAP = 10**7
SMALL_CAP = 12
MARGIN_FACTOR = 1e-6


def margin_for(bound: float) -> float:
    """Default offset realizing "strictly above a threshold" for a subsidy bound."""
    return MARGIN_FACTOR * bound


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("SUBSIDYLAB_THREADS", "1")))
    except ValueError:
        return 1
