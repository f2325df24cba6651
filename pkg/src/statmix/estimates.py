"""Point estimates with confidence intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

WILSON_MIN_COUNT = 10
# normal limits undercover badly for small p even with dozens of events
WILSON_EDGE = 0.1


def z_value(level: float, sides: int) -> float:
    alpha = 1 - level
    return NormalDist().inv_cdf(1 - alpha / sides)


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    trials: int
    lo: float
    hi: float
    level: float = 0.99
    sides: int = 2
    method: str = "normal"
    bias: float = 0.0

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "stderr": self.stderr,
            "trials": self.trials,
            "ci": [self.lo, self.hi],
            "level": self.level,
            "sides": self.sides,
            "method": self.method,
            "bias": self.bias,
        }


def proportion(successes: int, trials: int, level: float = 0.99, sides: int = 2) -> Estimate:
    """Binomial proportion; Wilson score interval near 0 or 1.

    Wilson is used when either count is below ``WILSON_MIN_COUNT`` or the
    estimate lies within ``WILSON_EDGE`` of 0 or 1.
    With ``sides=1`` the interval is ``[lo, 1]``-style one-sided on each end,
    i.e. ``lo`` and ``hi`` are the one-sided lower and upper limits.
    """
    if trials <= 0:
        raise ValueError("need at least one trial")
    p = successes / trials
    se = math.sqrt(p * (1 - p) / trials)
    z = z_value(level, sides)
    if min(successes, trials - successes) < WILSON_MIN_COUNT or min(p, 1 - p) < WILSON_EDGE:
        denom = 1 + z * z / trials
        centre = (p + z * z / (2 * trials)) / denom
        half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
        lo, hi, method = centre - half, centre + half, "wilson"
    else:
        lo, hi, method = p - z * se, p + z * se, "normal"
    return Estimate(p, se, trials, max(lo, 0.0), min(hi, 1.0), level, sides, method)


def mean_estimate(samples, level: float = 0.99) -> Estimate:
    x = np.asarray(samples, dtype=float)
    m = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
    z = z_value(level, 2)
    return Estimate(m, se, len(x), m - z * se, m + z * se, level, 2, "normal")


def variance_estimate(samples, level: float = 0.99) -> Estimate:
    """Sample variance with the large-sample standard error from the 4th moment."""
    x = np.asarray(samples, dtype=float)
    N = len(x)
    d = x - x.mean()
    v = float(d @ d / (N - 1))
    m4 = float(np.mean(d**4))
    se = math.sqrt(max(m4 - v * v, 0.0) / N)
    z = z_value(level, 2)
    return Estimate(v, se, N, v - z * se, v + z * se, level, 2, "normal")


def within_sigma(est: Estimate, target: float, k: float = 3.0) -> bool:
    return abs(est.value - target) <= k * est.stderr
