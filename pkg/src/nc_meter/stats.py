"""Cross-run association between a metric and an outcome.

r_squared is the squared Pearson correlation, computed symmetrically so
swapping the inputs returns the identical float.  The permutation test
shuffles the metric column, recounts how often a shuffled R^2 reaches the
observed one, and reports the add-one-smoothed p-value
(1 + exceed) / (1 + trials) alongside the raw ratio.

Shuffles come from numpy's seeded PCG64 generator (Fisher-Yates under the
hood) in fixed-size blocks with seeds spawned per block, so the result
depends only on the seed, never on scheduling or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError
from .summaries import EPS_COV_MEAN

GENERATOR_NAME = "numpy.random.PCG64 (Fisher-Yates shuffle)"

# Trials are drawn in blocks of this size, each from its own spawned seed
# stream; the block layout is part of the output contract.
_TRIAL_BLOCK = 1024


def cov(values) -> float | None:
    """Population std over the signed mean; None when the mean is ~zero."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or len(arr) < 2:
        raise DegenerateInputError("cov needs at least two values")
    mean = float(arr.mean())
    if abs(mean) < EPS_COV_MEAN:
        return None
    return float(arr.std()) / mean


def r_squared(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DegenerateInputError("r_squared needs two equal-length vectors")
    if len(x) < 3:
        raise DegenerateInputError("r_squared needs at least three points")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInputError("r_squared is undefined for a constant input")
    sxy = float(xc @ yc)
    return (sxy * sxy) / (sxx * syy)


@dataclass
class PermutationOutcome:
    observed_r2: float
    trials: int
    exceed_count: int
    p_value: float  # (1 + exceed) / (1 + trials)
    p_value_unsmoothed: float
    seed: int
    generator: str = GENERATOR_NAME


def permutation_test(metric, target, trials: int = 10_000, seed: int = 0) -> PermutationOutcome:
    """Right-tailed permutation test of R^2 between metric and target."""
    metric = np.asarray(metric, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if trials < 1:
        raise DegenerateInputError("permutation test needs at least one trial")
    observed = r_squared(metric, target)

    xc = metric - metric.mean()
    yc = target - target.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    denom = sxx * syy

    exceed = 0
    root = np.random.SeedSequence(seed)
    blocks = -(-trials // _TRIAL_BLOCK)
    children = root.spawn(blocks)
    done = 0
    for child in children:
        block = min(_TRIAL_BLOCK, trials - done)
        rng = np.random.default_rng(child)
        shuffled = rng.permuted(np.broadcast_to(xc, (block, len(xc))), axis=1)
        sxy = shuffled @ yc
        exceed += int(((sxy * sxy) / denom >= observed).sum())
        done += block
    return PermutationOutcome(
        observed_r2=observed,
        trials=trials,
        exceed_count=exceed,
        p_value=(1 + exceed) / (1 + trials),
        p_value_unsmoothed=exceed / trials,
        seed=seed,
    )
