"""Do the classifier and the nearest class mean pick the same class?

Two decision rules run over a validation stream.  The linear rule picks
argmax_c <w_c, h> + b_c.  The prototype rule picks the class whose mean is
nearest to h; since |h|^2 is constant across classes, it is scored as
argmax_c 2 <h, mu_c> - |mu_c|^2 without ever forming per-class distances.
The agreement rate is the fraction of samples where the rules coincide.
This compares two geometries of the same representation; it is not
accuracy, and the stream's labels play no part.

Classes never seen during accumulation have no mean, so they are excluded
from both candidate sets and tallied.  Near-ties (relative score gap under
tie_rel) are tallied, and the decision falls deterministically to the
lowest class id within the tie window.

Samples are processed in batches and classes in tiles, so memory stays
O(batch * tile) regardless of class count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateInputError
from .formats import ClassifierSet, EmbeddingRecord, StatsCheckpoint

# Relative score gap under which two candidates count as tied.
EPS_TIE_REL = 1e-6

_TINY = 1e-300


@dataclass
class AgreementResult:
    samples_evaluated: int
    agreements: int
    rate: float
    ties_linear: int
    ties_prototype: int
    excluded_classes: int
    candidate_classes: int

    @property
    def ties_total(self) -> int:
        return self.ties_linear + self.ties_prototype


def _decide(n_samples: int, num_cand: int, scorer, tile: int, tie_rel: float):
    """Pick a candidate index per sample; returns (indices, tie mask).

    scorer(t0, t1) yields the (n_samples, t1 - t0) score block for the
    candidate range [t0, t1).  Ties within tie_rel fall to the lowest
    candidate index inside the tie window.
    """
    if num_cand == 1:
        return np.zeros(n_samples, dtype=np.int64), np.zeros(n_samples, dtype=bool)
    rows = np.arange(n_samples)
    best = np.full(n_samples, -np.inf)
    second = np.full(n_samples, -np.inf)
    best_idx = np.zeros(n_samples, dtype=np.int64)
    for t0 in range(0, num_cand, tile):
        t1 = min(t0 + tile, num_cand)
        scores = np.array(scorer(t0, t1), dtype=np.float64)
        t_idx = scores.argmax(axis=1)
        t_best = scores[rows, t_idx]
        scores[rows, t_idx] = -np.inf
        t_second = scores.max(axis=1) if t1 - t0 > 1 else np.full(n_samples, -np.inf)
        better = t_best > best
        second = np.where(better, np.maximum(best, t_second), np.maximum(second, t_best))
        best_idx = np.where(better, t_idx + t0, best_idx)
        best = np.where(better, t_best, best)
    scale = np.maximum(np.maximum(np.abs(best), np.abs(second)), _TINY)
    ties = (best - second) < tie_rel * scale
    if ties.any():
        tie_rows = np.flatnonzero(ties)
        winner = best_idx[tie_rows].copy()
        tie_best = best[tie_rows]
        for t0 in range(0, num_cand, tile):
            t1 = min(t0 + tile, num_cand)
            scores = np.asarray(scorer(t0, t1), dtype=np.float64)[tie_rows]
            window_scale = np.maximum(np.maximum(np.abs(tie_best)[:, None], np.abs(scores)), _TINY)
            in_window = (tie_best[:, None] - scores) < tie_rel * window_scale
            has_any = in_window.any(axis=1)
            first = in_window.argmax(axis=1) + t0
            winner = np.where(has_any, np.minimum(winner, first), winner)
        best_idx[tie_rows] = winner
    return best_idx, ties


def _batches_from_records(records, batch: int):
    labels: list[int] = []
    vectors: list[np.ndarray] = []
    for rec in records:
        if isinstance(rec, EmbeddingRecord):
            label, vector = rec.label, rec.vector
        else:
            label, vector = rec
        vectors.append(np.asarray(vector))
        labels.append(int(label))
        if len(vectors) == batch:
            yield np.asarray(labels), np.stack(vectors)
            labels, vectors = [], []
    if vectors:
        yield np.asarray(labels), np.stack(vectors)


def agreement_rate(
    records,
    stats: StatsCheckpoint,
    classifiers: ClassifierSet,
    batch: int = 4096,
    tile: int = 1024,
    tie_rel: float = EPS_TIE_REL,
) -> AgreementResult:
    """Run both rules over a validation stream of embedding records."""
    if classifiers.num_classes != stats.num_classes:
        raise DataError(
            f"classifier carries {classifiers.num_classes} classes, "
            f"statistics carry {stats.num_classes}"
        )
    if classifiers.dim != stats.dim:
        raise DataError(f"classifier dim {classifiers.dim} does not match statistics dim {stats.dim}")
    candidates = np.flatnonzero(stats.counts >= 1)
    excluded = stats.num_classes - len(candidates)
    if len(candidates) == 0:
        raise DegenerateInputError("no class has samples; candidate set is empty")

    weights_t = classifiers.weights[candidates].astype(np.float64).T  # (d, P)
    biases = classifiers.biases[candidates].astype(np.float64)
    means_t2 = 2.0 * stats.means[candidates].T  # (d, P)
    mean_sq = (stats.means[candidates] ** 2).sum(axis=1)

    samples = 0
    agreements = 0
    ties_linear = 0
    ties_prototype = 0
    for _, vectors in _batches_from_records(records, batch):
        if vectors.shape[1] != stats.dim:
            raise DataError(
                f"validation vectors have dim {vectors.shape[1]}, statistics carry {stats.dim}"
            )
        h = vectors.astype(np.float64)

        def linear_scorer(t0, t1):
            return h @ weights_t[:, t0:t1] + biases[t0:t1]

        def prototype_scorer(t0, t1):
            return h @ means_t2[:, t0:t1] - mean_sq[t0:t1]

        lin_idx, lin_ties = _decide(len(h), len(candidates), linear_scorer, tile, tie_rel)
        pro_idx, pro_ties = _decide(len(h), len(candidates), prototype_scorer, tile, tie_rel)
        samples += len(h)
        agreements += int((lin_idx == pro_idx).sum())
        ties_linear += int(lin_ties.sum())
        ties_prototype += int(pro_ties.sum())
    if samples == 0:
        raise DegenerateInputError("validation stream is empty")
    return AgreementResult(
        samples_evaluated=samples,
        agreements=agreements,
        rate=agreements / samples,
        ties_linear=ties_linear,
        ties_prototype=ties_prototype,
        excluded_classes=excluded,
        candidate_classes=len(candidates),
    )
