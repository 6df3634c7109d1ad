"""Order-stable streaming summaries of value collections.

The reducer keeps count, mean, summed squared deviation, min, and max.
Chunks are folded with the exact pairwise merge rule, always in the order
they are offered, so a fixed chunk schedule gives bit-identical results
run over run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Coefficient of variation is undefined when the mean is this close to zero.
EPS_COV_MEAN = 1e-9


@dataclass(frozen=True)
class ValueSummary:
    """Moments and extremes of a value collection; population variance."""

    count: int
    mean: float | None
    variance: float | None
    min: float | None
    max: float | None

    @property
    def std(self) -> float | None:
        if self.variance is None:
            return None
        return math.sqrt(self.variance)

    def cov(self, eps_mean: float = EPS_COV_MEAN) -> float | None:
        """Dispersion as std over |mean|; None when the mean is ~zero."""
        if self.mean is None or abs(self.mean) < eps_mean:
            return None
        return self.std / abs(self.mean)


class SummaryReducer:
    """Accumulates chunks of values into one ValueSummary."""

    __slots__ = ("count", "mean", "m2", "min", "max")

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.min = math.inf
        self.max = -math.inf

    def add_chunk(self, values: np.ndarray) -> None:
        n = values.size
        if n == 0:
            return
        chunk_mean = float(values.mean())
        chunk_m2 = float(((values - chunk_mean) ** 2).sum())
        if self.count == 0:
            self.count = n
            self.mean = chunk_mean
            self.m2 = chunk_m2
        else:
            total = self.count + n
            delta = chunk_mean - self.mean
            self.mean += delta * (n / total)
            self.m2 += chunk_m2 + delta * delta * self.count * n / total
            self.count = total
        self.min = min(self.min, float(values.min()))
        self.max = max(self.max, float(values.max()))

    def finish(self) -> ValueSummary:
        if self.count == 0:
            return ValueSummary(count=0, mean=None, variance=None, min=None, max=None)
        return ValueSummary(
            count=self.count,
            mean=self.mean,
            variance=max(self.m2, 0.0) / self.count,
            min=self.min,
            max=self.max,
        )


def summarize(values: np.ndarray) -> ValueSummary:
    reducer = SummaryReducer()
    reducer.add_chunk(np.asarray(values, dtype=np.float64))
    return reducer.finish()
