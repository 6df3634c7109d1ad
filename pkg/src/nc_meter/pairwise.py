"""Pairwise geometry of class means, reduced tile by tile.

Everything here works from a statistics checkpoint: class means are
centered against the global mean, normalized into directions, and pairwise
quantities are folded into summaries without ever materializing a P x P
matrix.  Squared distances expand as |a|^2 + |b|^2 - 2<a, b>, so each tile
costs one small matrix product; peak memory stays O(P d + tile^2).

Tile pairs are enumerated in a fixed row-major order and their partial
summaries combined in that order, so results are bit-identical across
runs and across worker counts.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .accumulate import GlobalMean
from .errors import DegenerateInputError
from .formats import StatsCheckpoint
from .summaries import SummaryReducer, ValueSummary, summarize

# Directions are undefined below this norm; such classes are dropped.
EPS_DIRECTION = 1e-12
# Mean pairs closer than this in squared distance are skipped as degenerate.
EPS_DISTANCE_SQ = 1e-24

DEFAULT_TILE = 1024


@dataclass
class CenteredGeometry:
    """Class means centered on the global mean, with unit directions.

    Holds only classes that survived the occupancy threshold and have a
    resolvable direction.  variances is NaN where a class had fewer than
    two samples.
    """

    class_ids: np.ndarray  # (P,) int64, ids into the original class axis
    means: np.ndarray  # (P, d) float64, uncentered
    centered: np.ndarray  # (P, d) float64
    norms: np.ndarray  # (P,) float64, all > eps_direction
    units: np.ndarray  # (P, d) float64, rows of norm 1
    variances: np.ndarray  # (P,) float64, NaN where undefined
    global_mean: np.ndarray  # (d,) float64
    source_num_classes: int
    dim: int
    dropped_low_count: np.ndarray  # class ids under the occupancy threshold
    dropped_zero_direction: np.ndarray  # class ids with no direction

    @property
    def num_included(self) -> int:
        return len(self.class_ids)


def build_geometry(
    stats: StatsCheckpoint,
    global_mean: GlobalMean,
    min_count: int = 2,
    eps_direction: float = EPS_DIRECTION,
) -> CenteredGeometry:
    threshold = max(1, min_count)
    occupied = stats.counts >= threshold
    candidates = np.flatnonzero(occupied)
    dropped_low = np.flatnonzero(~occupied)
    centered = stats.means[candidates] - global_mean.vector
    norms = np.linalg.norm(centered, axis=1)
    keep = norms > eps_direction
    class_ids = candidates[keep]
    if len(class_ids) < 2:
        raise DegenerateInputError(
            f"only {len(class_ids)} classes have a usable direction; need at least 2"
        )
    centered = centered[keep]
    norms = norms[keep]
    return CenteredGeometry(
        class_ids=class_ids.astype(np.int64),
        means=stats.means[class_ids].copy(),
        centered=centered,
        norms=norms,
        units=centered / norms[:, None],
        variances=stats.variances()[class_ids],
        global_mean=np.asarray(global_mean.vector, dtype=np.float64),
        source_num_classes=stats.num_classes,
        dim=stats.dim,
        dropped_low_count=dropped_low.astype(np.int64),
        dropped_zero_direction=candidates[~keep].astype(np.int64),
    )


def _tile_pairs(p: int, tile: int):
    """Row-major (i-block, j-block) ranges covering all unordered pairs."""
    starts = range(0, p, tile)
    for i0 in starts:
        i1 = min(i0 + tile, p)
        for j0 in range(i0, p, tile):
            yield i0, i1, j0, min(j0 + tile, p)


def _pair_mask(i0: int, i1: int, j0: int, j1: int) -> np.ndarray:
    """Mask selecting each unordered pair exactly once within a tile."""
    if i0 == j0:
        return np.triu(np.ones((i1 - i0, j1 - j0), dtype=bool), k=1)
    return np.ones((i1 - i0, j1 - j0), dtype=bool)


def _run_tiles(tasks, fn, workers: int):
    """Yield fn(task) in task order, keeping only a bounded window in flight.

    Reduction order equals task order regardless of worker count, so
    results stay bit-identical; the window keeps peak memory at a few
    tiles instead of the whole tiling.
    """
    if workers <= 1:
        for task in tasks:
            yield fn(task)
        return
    tasks = list(tasks)
    window = 4 * workers
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for start in range(0, len(tasks), window):
            yield from pool.map(fn, tasks[start : start + window])


@dataclass
class CdnvSummary:
    """Variance-to-separation ratios over class pairs.

    For a pair, the value is the summed per-class variances over twice the
    squared distance between their uncentered means.  log10 holds the same
    pairs on a log10 axis, excluding exact zeros.
    """

    raw: ValueSummary
    log10: ValueSummary
    degenerate_pairs: int  # pairs skipped for near-zero mean separation
    log_excluded_pairs: int  # zero-valued pairs absent from the log axis


def cdnv_summary(
    geom: CenteredGeometry,
    tile: int = DEFAULT_TILE,
    eps_distance_sq: float = EPS_DISTANCE_SQ,
    workers: int = 1,
) -> CdnvSummary:
    defined = np.isfinite(geom.variances)
    means = geom.means[defined]
    variances = geom.variances[defined]
    sq_norms = (means * means).sum(axis=1)
    p = len(means)
    if p < 2:
        raise DegenerateInputError(
            f"only {p} classes have a defined variance; need at least 2"
        )

    def one_tile(task):
        i0, i1, j0, j1 = task
        mask = _pair_mask(i0, i1, j0, j1)
        d2 = sq_norms[i0:i1, None] + sq_norms[None, j0:j1] - 2.0 * (means[i0:i1] @ means[j0:j1].T)
        valid = d2 > eps_distance_sq
        take = mask & valid
        values = (variances[i0:i1, None] + variances[None, j0:j1])[take] / (2.0 * d2[take])
        return values, int((mask & ~valid).sum())

    raw = SummaryReducer()
    logs = SummaryReducer()
    degenerate = 0
    log_excluded = 0
    for values, skipped in _run_tiles(_tile_pairs(p, tile), one_tile, workers):
        raw.add_chunk(values)
        positive = values > 0
        logs.add_chunk(np.log10(values[positive]))
        log_excluded += int((~positive).sum())
        degenerate += skipped
    return CdnvSummary(
        raw=raw.finish(),
        log10=logs.finish(),
        degenerate_pairs=degenerate,
        log_excluded_pairs=log_excluded,
    )


@dataclass
class InterferenceSummary:
    """Inner products between distinct unit directions.

    etf_gap is the mean's excess over -1/(P-1), the value every pair takes
    when P directions form a simplex equiangular tight frame.
    """

    values: ValueSummary
    etf_gap: float | None


def interference_summary(
    geom: CenteredGeometry, tile: int = DEFAULT_TILE, workers: int = 1
) -> InterferenceSummary:
    units = geom.units
    p = len(units)

    def one_tile(task):
        i0, i1, j0, j1 = task
        mask = _pair_mask(i0, i1, j0, j1)
        return (units[i0:i1] @ units[j0:j1].T)[mask]

    reducer = SummaryReducer()
    for values in _run_tiles(_tile_pairs(p, tile), one_tile, workers):
        reducer.add_chunk(values)
    summary = reducer.finish()
    gap = None if summary.mean is None else summary.mean - (-1.0 / (p - 1))
    return InterferenceSummary(values=summary, etf_gap=gap)


@dataclass
class LogKernelSummary:
    """Negative log distances between distinct unit directions.

    Large positive values flag directions that crowd together; a uniform
    spread keeps the collection tight.  Coincident directions (distance
    under eps) are skipped and tallied.
    """

    values: ValueSummary
    coincident_pairs: int


def logkernel_summary(
    geom: CenteredGeometry,
    tile: int = DEFAULT_TILE,
    eps_direction: float = EPS_DIRECTION,
    workers: int = 1,
) -> LogKernelSummary:
    units = geom.units
    unit_sq = (units * units).sum(axis=1)
    p = len(units)

    def one_tile(task):
        i0, i1, j0, j1 = task
        mask = _pair_mask(i0, i1, j0, j1)
        d2 = unit_sq[i0:i1, None] + unit_sq[None, j0:j1] - 2.0 * (units[i0:i1] @ units[j0:j1].T)
        dist = np.sqrt(np.clip(d2, 0.0, None))
        valid = dist > eps_direction
        take = mask & valid
        return -np.log(dist[take]), int((mask & ~valid).sum())

    reducer = SummaryReducer()
    coincident = 0
    for values, skipped in _run_tiles(_tile_pairs(p, tile), one_tile, workers):
        reducer.add_chunk(values)
        coincident += skipped
    return LogKernelSummary(values=reducer.finish(), coincident_pairs=coincident)


@dataclass
class NormSummary:
    """Centered mean norms per class, raw and on a natural-log axis.

    The log collection's cov() is the equal-norm score: zero when every
    class mean sits at the same distance from the global mean.
    """

    norms: ValueSummary
    log_norms: ValueSummary


def norm_summary(geom: CenteredGeometry) -> NormSummary:
    return NormSummary(norms=summarize(geom.norms), log_norms=summarize(np.log(geom.norms)))
