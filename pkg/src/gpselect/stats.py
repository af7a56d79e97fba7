"""Summary statistics: pooled-variance t-test and box-plot numbers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import betainc

ALPHA = 0.05
NOTCH_FACTOR = 1.57
WHISKER_FACTOR = 1.5


@dataclass(frozen=True)
class TTest:
    t: float
    p: float
    df: int

    @property
    def significant(self) -> bool:
        return self.p < ALPHA


def t_sf_two_tailed(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return float(betainc(df / 2.0, 0.5, x))


def t_test(a: Sequence[float], b: Sequence[float]) -> TTest:
    """Two-sample Student's t-test with pooled variance, two-tailed."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise ValueError("each sample needs at least 2 observations")
    df = na + nb - 2
    diff = a.mean() - b.mean()
    pooled = (((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()) / df
    se = math.sqrt(pooled * (1.0 / na + 1.0 / nb))
    if se == 0.0:
        if diff == 0.0:
            return TTest(0.0, 1.0, df)
        return TTest(math.copysign(math.inf, diff), 0.0, df)
    t = float(diff / se)
    return TTest(t, min(1.0, t_sf_two_tailed(t, df)), df)


@dataclass(frozen=True)
class BoxStats:
    median: float
    q1: float
    q3: float
    notch: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...] = field(default_factory=tuple)

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def box_stats(values: Sequence[float]) -> BoxStats:
    v = np.sort(np.asarray(values, dtype=float))
    if len(v) == 0:
        raise ValueError("box statistics need at least one value")
    q1, med, q3 = (float(q) for q in np.quantile(v, [0.25, 0.5, 0.75], method="linear"))
    iqr = q3 - q1
    lo_fence = q1 - WHISKER_FACTOR * iqr
    hi_fence = q3 + WHISKER_FACTOR * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    outliers = tuple(float(x) for x in v[(v < lo_fence) | (v > hi_fence)])
    return BoxStats(
        median=med,
        q1=q1,
        q3=q3,
        notch=NOTCH_FACTOR * iqr / math.sqrt(len(v)),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=outliers,
    )


def mean_std(values: Sequence[float]) -> tuple[float, float, bool]:
    """Mean and sample standard deviation; the flag marks a single value (std reported as 0)."""
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        raise ValueError("need at least one value")
    if len(v) == 1:
        return float(v[0]), 0.0, True
    return float(v.mean()), float(v.std(ddof=1)), False
