"""Alignment between classifier rows and their class directions.

For each class the classifier row and the centered class mean are both
normalized; their inner product is the alignment (1 when the classifier
points exactly along its class direction), and the Euclidean distance
between the two unit vectors is the legacy distance form.  The two are
tied by distance^2 = 2 - 2 * alignment.

Alignment dispersion across classes (cov of the alignments) measures how
uniformly dual the classifier is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateInputError
from .formats import ClassifierSet
from .pairwise import CenteredGeometry
from .summaries import ValueSummary, summarize

# Classifier rows below this norm have no direction and are dropped.
EPS_WEIGHT = 1e-12


@dataclass
class DualityProfile:
    class_ids: np.ndarray  # (P,) classes with both a direction and a weight row
    alignment: np.ndarray  # (P,) <w_c / |w_c|, u_c>
    distance: np.ndarray  # (P,) |w_c / |w_c| - u_c|
    dropped_zero_weight: list[int]
    alignment_summary: ValueSummary
    distance_summary: ValueSummary


def duality_profile(
    geom: CenteredGeometry,
    classifiers: ClassifierSet,
    eps_weight: float = EPS_WEIGHT,
) -> DualityProfile:
    if classifiers.num_classes != geom.source_num_classes:
        raise DataError(
            f"classifier carries {classifiers.num_classes} classes, "
            f"statistics carry {geom.source_num_classes}"
        )
    if classifiers.dim != geom.dim:
        raise DataError(
            f"classifier dim {classifiers.dim} does not match statistics dim {geom.dim}"
        )
    weights = classifiers.weights[geom.class_ids].astype(np.float64)
    norms = np.linalg.norm(weights, axis=1)
    keep = norms > eps_weight
    dropped = [int(c) for c in geom.class_ids[~keep]]
    if not keep.any():
        raise DegenerateInputError("every classifier row has near-zero norm")
    unit_weights = weights[keep] / norms[keep, None]
    units = geom.units[keep]
    alignment = (unit_weights * units).sum(axis=1)
    distance = np.linalg.norm(unit_weights - units, axis=1)
    return DualityProfile(
        class_ids=geom.class_ids[keep],
        alignment=alignment,
        distance=distance,
        dropped_zero_weight=dropped,
        alignment_summary=summarize(alignment),
        distance_summary=summarize(distance),
    )
