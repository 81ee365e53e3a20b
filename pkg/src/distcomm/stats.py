"""Small statistics helpers shared by the simulation modules."""
from __future__ import annotations

import math

#: two-sided 95% normal quantile, fixed for all confidence intervals
Z_95 = 1.959963984540054


def wilson_interval(successes: int, trials: int, z: float = Z_95):
    """Wilson score interval: returns (center, halfwidth).

    Well-behaved at 0 and 1 unlike the plain normal interval.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p_hat = successes / trials
    denom = 1.0 + z * z / trials
    center = (p_hat + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(
        p_hat * (1 - p_hat) / trials + z * z / (4 * trials * trials))
    return center, half


def wilson_halfwidth(successes: int, trials: int, z: float = Z_95) -> float:
    return wilson_interval(successes, trials, z)[1]
