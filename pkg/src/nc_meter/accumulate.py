"""Streaming per-class first and second moments.

One pass over the data maintains, per class, the count, the running mean
vector, and m2, the summed squared deviation from that mean.  The update
is Welford's: shift the mean by (h - mean) / count, then grow m2 by
<h - mean_old, h - mean_new>.  Partial accumulators merge exactly, so
shards can be processed independently and combined afterwards; merges are
reduced in a fixed tree order to keep repeated runs bit-identical.

The unbiased per-class variance is m2 / (count - 1).  The global mean is
the unweighted average of class means over classes that appeared at all,
so rare classes are not drowned out by frequent ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateInputError
from .formats import StatsCheckpoint


class ClassAccumulator:
    """Single-class streaming moments; the reference implementation."""

    def __init__(self, dim: int):
        self.dim = dim
        self.count = 0
        self.mean = np.zeros(dim, dtype=np.float64)
        self.m2 = 0.0

    def update(self, vector) -> None:
        h = np.asarray(vector, dtype=np.float64)
        if h.shape != (self.dim,):
            raise DataError(f"vector shape {h.shape} does not match dim {self.dim}")
        if not np.isfinite(h).all():
            raise DataError("non-finite vector")
        self.count += 1
        delta = h - self.mean
        self.mean += delta / self.count
        self.m2 += float(delta @ (h - self.mean))

    def merge(self, other: "ClassAccumulator") -> None:
        if other.dim != self.dim:
            raise DataError(f"cannot merge dim {other.dim} into dim {self.dim}")
        if other.count == 0:
            return
        if self.count == 0:
            self.count = other.count
            self.mean = other.mean.copy()
            self.m2 = other.m2
            return
        total = self.count + other.count
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.count / total)
        self.m2 = self.m2 + other.m2 + float(delta @ delta) * self.count * other.count / total
        self.count = total

    def copy(self) -> "ClassAccumulator":
        out = ClassAccumulator(self.dim)
        out.count = self.count
        out.mean = self.mean.copy()
        out.m2 = self.m2
        return out

    def variance(self) -> float:
        """Unbiased sample variance; NaN with fewer than two samples."""
        if self.count < 2:
            return float("nan")
        return self.m2 / (self.count - 1)


class MultiClassAccumulator:
    """Per-class moments over a labeled stream, batch-updated.

    Within a batch each class's contribution is computed exactly in two
    passes over the in-memory rows, then merged into the running state
    with the same pairwise rule ClassAccumulator uses.  Identical input
    order and batching reproduce bit-identical state.
    """

    def __init__(self, num_classes: int, dim: int, grow: bool = False):
        if num_classes < 1 and not grow:
            raise DataError("num_classes must be >= 1")
        self.dim = dim
        self.grow = grow
        self.num_classes = num_classes
        self.counts = np.zeros(num_classes, dtype=np.int64)
        self.means = np.zeros((num_classes, dim), dtype=np.float64)
        self.m2 = np.zeros(num_classes, dtype=np.float64)

    def _ensure_classes(self, needed: int) -> None:
        if needed <= self.num_classes:
            return
        if not self.grow:
            raise DataError(
                f"label {needed - 1} out of range for {self.num_classes} declared classes"
            )
        self.counts = np.concatenate([self.counts, np.zeros(needed - self.num_classes, np.int64)])
        self.means = np.vstack([self.means, np.zeros((needed - self.num_classes, self.dim))])
        self.m2 = np.concatenate([self.m2, np.zeros(needed - self.num_classes)])
        self.num_classes = needed

    def update_batch(self, labels, vectors) -> None:
        labels = np.asarray(labels)
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[1] != self.dim or vectors.shape[0] != labels.shape[0]:
            raise DataError(
                f"batch shape mismatch: {labels.shape} labels, {vectors.shape} vectors, dim {self.dim}"
            )
        if len(labels) == 0:
            return
        if not np.isfinite(vectors).all():
            raise DataError("non-finite vector in batch")
        if (labels.astype(np.int64) < 0).any():
            raise DataError("negative label in batch")
        self._ensure_classes(int(labels.max()) + 1)

        order = np.argsort(labels, kind="stable")
        sorted_labels = labels[order]
        sorted_vectors = vectors[order]
        classes, starts = np.unique(sorted_labels, return_index=True)
        classes = classes.astype(np.int64)
        batch_counts = np.diff(np.append(starts, len(sorted_labels)))
        sums = np.add.reduceat(sorted_vectors, starts, axis=0)
        batch_means = sums / batch_counts[:, None]
        centered = sorted_vectors - np.repeat(batch_means, batch_counts, axis=0)
        batch_m2 = np.add.reduceat((centered * centered).sum(axis=1), starts)

        prior = self.counts[classes].astype(np.float64)
        total = prior + batch_counts
        delta = batch_means - self.means[classes]
        self.means[classes] += delta * (batch_counts / total)[:, None]
        self.m2[classes] += batch_m2 + (delta * delta).sum(axis=1) * prior * batch_counts / total
        self.counts[classes] += batch_counts

    def merge(self, other: "MultiClassAccumulator") -> None:
        if other.dim != self.dim:
            raise DataError(f"cannot merge dim {other.dim} into dim {self.dim}")
        self._ensure_classes(other.num_classes)
        if other.num_classes < self.num_classes:
            pad = self.num_classes - other.num_classes
            other_counts = np.concatenate([other.counts, np.zeros(pad, np.int64)])
            other_means = np.vstack([other.means, np.zeros((pad, self.dim))])
            other_m2 = np.concatenate([other.m2, np.zeros(pad)])
        else:
            other_counts, other_means, other_m2 = other.counts, other.means, other.m2
        prior = self.counts.astype(np.float64)
        added = other_counts.astype(np.float64)
        total = prior + added
        occupied = total > 0
        safe_total = np.where(occupied, total, 1.0)
        delta = other_means - self.means
        self.means += delta * np.where(occupied, added / safe_total, 0.0)[:, None]
        self.m2 += other_m2 + (delta * delta).sum(axis=1) * prior * added / safe_total
        self.counts += other_counts

    def total_samples(self) -> int:
        return int(self.counts.sum())

    def to_checkpoint(self) -> StatsCheckpoint:
        return StatsCheckpoint(
            num_classes=self.num_classes,
            dim=self.dim,
            counts=self.counts.astype(np.uint64),
            means=self.means.copy(),
            m2=self.m2.copy(),
        )


def merge_tree(parts: list) -> "MultiClassAccumulator | ClassAccumulator":
    """Fold accumulators pairwise in a fixed balanced tree.

    The reduction order depends only on len(parts), so repeated runs over
    the same shards produce bit-identical results.
    """
    if not parts:
        raise DegenerateInputError("nothing to merge")
    level = list(parts)
    while len(level) > 1:
        merged = []
        for i in range(0, len(level) - 1, 2):
            level[i].merge(level[i + 1])
            merged.append(level[i])
        if len(level) % 2:
            merged.append(level[-1])
        level = merged
    return level[0]


def accumulate_batches(batches, num_classes: int | None, dim: int) -> MultiClassAccumulator:
    """Run a (labels, vectors) batch iterator into a fresh accumulator.

    With num_classes=None the class axis grows to fit the largest label.
    """
    acc = MultiClassAccumulator(num_classes or 0, dim, grow=num_classes is None)
    for labels, vectors in batches:
        acc.update_batch(labels, vectors)
    return acc


@dataclass
class GlobalMean:
    """Unweighted average of class means over classes seen at least once."""

    vector: np.ndarray
    contributing_classes: int


@dataclass
class ExclusionReport:
    """Class ids dropped at each occupancy threshold."""

    empty_classes: list[int]
    below_min_count: list[int]
    min_count: int


def global_mean_from_stats(stats: StatsCheckpoint) -> GlobalMean:
    occupied = stats.counts >= 1
    contributing = int(occupied.sum())
    if contributing == 0:
        raise DegenerateInputError("every class is empty")
    vector = stats.means[occupied].mean(axis=0)
    return GlobalMean(vector=vector, contributing_classes=contributing)


def finalize(
    acc: MultiClassAccumulator, min_count: int = 2
) -> tuple[StatsCheckpoint, GlobalMean, ExclusionReport]:
    """Freeze an accumulator into a checkpoint plus the global mean.

    The global mean averages over every class that appeared at all;
    min_count only feeds the exclusion report, which lists what downstream
    geometry building will drop.
    """
    stats = acc.to_checkpoint()
    global_mean = global_mean_from_stats(stats)
    empty = np.flatnonzero(stats.counts == 0)
    below = np.flatnonzero((stats.counts >= 1) & (stats.counts < min_count))
    report = ExclusionReport(
        empty_classes=[int(c) for c in empty],
        below_min_count=[int(c) for c in below],
        min_count=min_count,
    )
    return stats, global_mean, report
