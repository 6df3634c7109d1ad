"""Synthetic streams with known geometry and closed-form expectations.

Class means are laid out on a chosen frame, optionally scaled, and samples
are drawn as mean + sigma * N(0, I).  The returned truth sheet carries the
values the layout pins down exactly (pairwise direction products, equal
norms, expected variance ratios), so a measurement pipeline can be checked
end to end against construction instead of against itself.

Frames:

- simplex_etf: an orthonormal basis, centered and renormalized.  Any two
  directions meet at exactly -1/(C-1).  Needs C <= d + 1; the C = d + 1
  case routes through a Helmert basis of the centered subspace.
- orthonormal: the first C basis vectors (C <= d).  After centering this
  is the same simplex, but the raw means sit at unit distance sqrt(2).
- uniform_sphere: independent Gaussian directions, normalized.
- random_gaussian: independent Gaussian means, unnormalized.

Classifier modes: tied_to_means copies the true means, perturbed adds
scaled Gaussian noise to them, random draws rows independently.

All randomness is derived from one seed through named substreams, so the
same spec always produces byte-identical artifacts, and validation
streams with fresh noise come from a stream index, not a new spec.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .formats import (
    ClassifierSet,
    StatsCheckpoint,
    write_classifier,
    write_embedding_batches,
)

GEOMETRIES = ("simplex_etf", "orthonormal", "uniform_sphere", "random_gaussian")
CLASSIFIER_MODES = ("tied_to_means", "random", "perturbed")

_DRAW_CHUNK = 65536


@dataclass
class SynthSpec:
    num_classes: int
    dim: int
    samples_per_class: int | list[int]
    geometry: str = "simplex_etf"
    noise_sigma: float = 0.1
    classifier_mode: str = "tied_to_means"
    seed: int = 0
    mean_scale: float = 1.0
    perturbation: float = 0.1

    def counts(self) -> np.ndarray:
        if isinstance(self.samples_per_class, int):
            return np.full(self.num_classes, self.samples_per_class, dtype=np.int64)
        counts = np.asarray(self.samples_per_class, dtype=np.int64)
        if counts.shape != (self.num_classes,):
            raise UsageError(
                f"samples_per_class holds {counts.shape[0]} entries for {self.num_classes} classes"
            )
        return counts

    def validate(self) -> None:
        if self.num_classes < 2:
            raise UsageError("need at least two classes")
        if self.dim < 1:
            raise UsageError("dim must be >= 1")
        if self.geometry not in GEOMETRIES:
            raise UsageError(f"unknown geometry {self.geometry!r}; pick from {GEOMETRIES}")
        if self.classifier_mode not in CLASSIFIER_MODES:
            raise UsageError(
                f"unknown classifier mode {self.classifier_mode!r}; pick from {CLASSIFIER_MODES}"
            )
        if self.geometry == "simplex_etf" and self.num_classes > self.dim + 1:
            raise UsageError(
                f"a simplex of {self.num_classes} directions needs dim >= {self.num_classes - 1}"
            )
        if self.geometry == "orthonormal" and self.num_classes > self.dim:
            raise UsageError(f"{self.num_classes} orthonormal directions need dim >= {self.num_classes}")
        if self.noise_sigma < 0:
            raise UsageError("noise_sigma must be >= 0")
        if self.mean_scale == 0:
            raise UsageError("mean_scale must be nonzero")
        if (self.counts() < 0).any():
            raise UsageError("samples_per_class must be >= 0")


def _substream(seed: int, index: int) -> np.random.Generator:
    # stable named substreams: 0 = frame, 1 = classifier, 2+k = sample stream k
    children = np.random.SeedSequence(seed).spawn(index + 1)
    return np.random.default_rng(children[index])


def _helmert_columns(c: int) -> np.ndarray:
    """Columns of the Helmert basis: c vectors in R^(c-1), Gram I - J/c."""
    h = np.zeros((c - 1, c))
    for k in range(1, c):
        s = np.sqrt(k * (k + 1.0))
        h[k - 1, :k] = 1.0 / s
        h[k - 1, k] = -k / s
    return h.T


def class_directions(spec: SynthSpec) -> np.ndarray:
    """Unit-ish direction rows for the spec's frame, before scaling."""
    c, d = spec.num_classes, spec.dim
    rng = _substream(spec.seed, 0)
    if spec.geometry == "simplex_etf":
        if c <= d:
            frame = np.zeros((c, d))
            frame[:, :c] = np.eye(c) - 1.0 / c
        else:  # c == d + 1: the simplex lives in the centered subspace
            frame = np.zeros((c, d))
            frame[:, : c - 1] = _helmert_columns(c)
        return frame / np.linalg.norm(frame, axis=1, keepdims=True)
    if spec.geometry == "orthonormal":
        frame = np.zeros((c, d))
        frame[:, :c] = np.eye(c)
        return frame
    if spec.geometry == "uniform_sphere":
        frame = rng.standard_normal((c, d))
        return frame / np.linalg.norm(frame, axis=1, keepdims=True)
    # random_gaussian
    return rng.standard_normal((c, d))


@dataclass
class SynthInstance:
    spec: SynthSpec
    means: np.ndarray  # (C, d) float64
    weights: np.ndarray  # (C, d) float64


def make_instance(spec: SynthSpec) -> SynthInstance:
    spec.validate()
    means = class_directions(spec) * spec.mean_scale
    rng = _substream(spec.seed, 1)
    if spec.classifier_mode == "tied_to_means":
        weights = means.copy()
    elif spec.classifier_mode == "perturbed":
        weights = means + spec.perturbation * rng.standard_normal(means.shape)
    else:
        weights = rng.standard_normal(means.shape)
    return SynthInstance(spec=spec, means=means, weights=weights)


def stream_bytes(instance: SynthInstance, stream_index: int = 0) -> bytes:
    """One labeled sample stream; stream_index picks fresh noise."""
    spec = instance.spec
    rng = _substream(spec.seed, 2 + stream_index)
    counts = spec.counts()

    def batches():
        for c in range(spec.num_classes):
            remaining = int(counts[c])
            while remaining > 0:
                n = min(remaining, _DRAW_CHUNK)
                noise = rng.standard_normal((n, spec.dim)) * spec.noise_sigma
                yield np.full(n, c, dtype=np.uint32), (instance.means[c] + noise).astype(np.float32)
                remaining -= n

    return write_embedding_batches(batches(), spec.dim)


def classifier_bytes(instance: SynthInstance) -> bytes:
    spec = instance.spec
    return write_classifier(
        ClassifierSet(
            num_classes=spec.num_classes,
            dim=spec.dim,
            weights=instance.weights.astype(np.float32),
            biases=np.zeros(spec.num_classes, dtype=np.float32),
            has_bias=False,
        )
    )


def true_checkpoint(instance: SynthInstance) -> StatsCheckpoint:
    """The exact statistics a noiseless stream accumulates, in float64.

    Only defined at noise_sigma = 0, where every sample equals its class
    mean: counts from the spec, means from the construction, m2 = 0.
    """
    spec = instance.spec
    if spec.noise_sigma != 0:
        raise UsageError("the exact checkpoint is only defined for noise_sigma = 0")
    return StatsCheckpoint(
        num_classes=spec.num_classes,
        dim=spec.dim,
        counts=spec.counts().astype(np.uint64),
        means=instance.means.copy(),
        m2=np.zeros(spec.num_classes),
    )


def _pair_distance_sq(spec: SynthSpec) -> float | None:
    c, scale = spec.num_classes, spec.mean_scale
    if spec.geometry == "simplex_etf":
        return scale * scale * 2.0 * c / (c - 1.0)
    if spec.geometry == "orthonormal":
        return 2.0 * scale * scale
    return None


def ground_truth(spec: SynthSpec) -> dict:
    """Construction-pinned expectations; None where the frame pins nothing.

    Values are exact for a noiseless stream and asymptotic targets
    otherwise (the variance ratio converges at rate 1/sqrt(n)).
    """
    c = spec.num_classes
    equal_norm_frames = ("simplex_etf", "orthonormal", "uniform_sphere")
    dist_sq = _pair_distance_sq(spec)
    expected: dict = {
        "interference_mean": -1.0 / (c - 1) if spec.geometry in ("simplex_etf", "orthonormal") else None,
        "equinorm_cov": 0.0 if spec.geometry in ("simplex_etf", "orthonormal") else None,
        "pair_distance_sq": dist_sq,
        "cdnv_pair_mean": None
        if dist_sq is None
        else spec.noise_sigma**2 * spec.dim / dist_sq,
        "alignment_mean": 1.0
        if spec.classifier_mode == "tied_to_means" and spec.geometry == "simplex_etf"
        else None,
        "agreement_rate": 1.0
        if spec.classifier_mode == "tied_to_means" and spec.geometry in equal_norm_frames
        else None,
    }
    return {
        "spec": {
            "num_classes": spec.num_classes,
            "dim": spec.dim,
            "samples_per_class": [int(n) for n in spec.counts()],
            "geometry": spec.geometry,
            "noise_sigma": spec.noise_sigma,
            "classifier_mode": spec.classifier_mode,
            "seed": spec.seed,
            "mean_scale": spec.mean_scale,
            "perturbation": spec.perturbation,
        },
        "expected": expected,
    }


@dataclass
class SynthOutput:
    embeddings: bytes
    classifiers: bytes
    truth: dict = field(default_factory=dict)


def generate(spec: SynthSpec) -> SynthOutput:
    """Emit the full artifact set for one spec: stream, classifier, truth."""
    instance = make_instance(spec)
    return SynthOutput(
        embeddings=stream_bytes(instance, stream_index=0),
        classifiers=classifier_bytes(instance),
        truth=ground_truth(spec),
    )
