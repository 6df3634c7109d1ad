"""Writers for the two little-endian containers the metric engine reads.

NCEMB1, a labeled embedding stream::

    magic   8 bytes  b"NCEMB1\\x00\\x00"
    header  u32 version (=1), u32 dim, u64 declared_count
    record  u32 label, dim * f32   (repeated)

NCWGT1, a classifier snapshot::

    magic   8 bytes  b"NCWGT1\\x00\\x00"
    header  u32 version (=1), u32 num_classes, u32 dim, u8 has_bias, 3 pad
    body    num_classes * dim * f32 row-major weights
            num_classes * f32 biases   (only when has_bias = 1)

The declared count goes into the NCEMB1 header up front, so the writer
has to know how many records the run will produce before the first one
is appended; downstream readers then get truncation detection for free.
Everything is validated on the way out — a file this module finishes
writing is one the engine will accept.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DataError, UsageError

EMB_MAGIC = b"NCEMB1\x00\x00"
WGT_MAGIC = b"NCWGT1\x00\x00"
FORMAT_VERSION = 1

_EMB_HEADER = struct.Struct("<IIQ")
_WGT_HEADER = struct.Struct("<IIIB3x")

_LABEL_LIMIT = 1 << 32


class EmbeddingWriter:
    """Append (label, vector) batches to an NCEMB1 stream.

    The header is emitted on construction; ``append`` adds batches and
    ``finish`` checks the record tally against the declared count.
    """

    def __init__(self, sink, dim: int, declared_count: int):
        if dim < 1:
            raise UsageError("embedding dim must be >= 1")
        if declared_count < 0:
            raise UsageError("declared record count must be >= 0")
        self._sink = sink
        self.dim = dim
        self.declared_count = declared_count
        self.written = 0
        # label and vector sit adjacent with no padding: itemsize 4 + 4*dim
        self._dtype = np.dtype([("label", "<u4"), ("vector", "<f4", (dim,))])
        sink.write(EMB_MAGIC)
        sink.write(_EMB_HEADER.pack(FORMAT_VERSION, dim, declared_count))

    def append(self, labels, vectors) -> None:
        labels = np.asarray(labels)
        vectors = np.asarray(vectors)
        if labels.ndim != 1 or vectors.shape != (len(labels), self.dim):
            raise DataError(
                f"batch shapes disagree: {len(labels)} labels, vectors {vectors.shape}, dim {self.dim}"
            )
        if len(labels) == 0:
            return
        if labels.min() < 0 or labels.max() >= _LABEL_LIMIT:
            raise DataError("labels must fit in an unsigned 32-bit integer")
        if not np.isfinite(vectors).all():
            bad = int(np.flatnonzero(~np.isfinite(vectors).all(axis=1))[0])
            raise DataError(f"record {self.written + bad} holds a non-finite value")
        rec = np.empty(len(labels), dtype=self._dtype)
        rec["label"] = labels
        rec["vector"] = vectors
        self._sink.write(rec.tobytes())
        self.written += len(labels)

    def finish(self) -> int:
        """Return the record tally, raising if it misses the declared count."""
        if self.declared_count and self.written != self.declared_count:
            raise DataError(
                f"declared {self.declared_count} records but wrote {self.written}"
            )
        return self.written


def write_classifier(sink, weights, biases=None) -> None:
    """Write an NCWGT1 snapshot from a (C, dim) weight matrix."""
    w = np.ascontiguousarray(weights, dtype="<f4")
    if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
        raise DataError(f"weights must be a (classes, dim) matrix, got shape {w.shape}")
    if not np.isfinite(w).all():
        raise DataError("classifier weights hold a non-finite value")
    num_classes, dim = w.shape
    has_bias = biases is not None
    if has_bias:
        b = np.ascontiguousarray(biases, dtype="<f4")
        if b.shape != (num_classes,):
            raise DataError(f"biases must have shape ({num_classes},), got {b.shape}")
        if not np.isfinite(b).all():
            raise DataError("classifier biases hold a non-finite value")
    sink.write(WGT_MAGIC)
    sink.write(_WGT_HEADER.pack(FORMAT_VERSION, num_classes, dim, int(has_bias)))
    sink.write(w.tobytes())
    if has_bias:
        sink.write(b.tobytes())
