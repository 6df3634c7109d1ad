"""Binary containers and tabular formats.

Three little-endian binary containers move data between pipeline stages:

NCEMB1, a labeled embedding stream::

    magic   8 bytes  b"NCEMB1\\x00\\x00"
    header  u32 version (=1), u32 dim, u64 declared_count
    record  u32 label, dim * f32   (repeated)

A ``declared_count`` of zero means "unknown" and permits writing to pipes;
when nonzero it must match the number of records actually present.

NCWGT1, a classifier snapshot::

    magic   8 bytes  b"NCWGT1\\x00\\x00"
    header  u32 version (=1), u32 num_classes, u32 dim, u8 has_bias, 3 pad
    body    num_classes * dim * f32 row-major weights
            num_classes * f32 biases   (only when has_bias = 1)

NCSTA1, a per-class statistics checkpoint (64-bit payload)::

    magic   8 bytes  b"NCSTA1\\x00\\x00"
    header  u32 version (=1), u32 num_classes, u32 dim
    class   u64 count, dim * f64 mean, f64 m2   (repeated num_classes times)

Readers never trust a declared count enough to allocate for it up front;
buffers grow only with bytes actually read, so a hostile header cannot
force a giant allocation.

The module also owns the JSON metric report (sorted keys, shortest
round-trip decimals, no NaN/Inf) and the run-table CSV used for
cross-run analysis.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptionError, DataError, FormatError, TruncationError

EMB_MAGIC = b"NCEMB1\x00\x00"
WGT_MAGIC = b"NCWGT1\x00\x00"
STA_MAGIC = b"NCSTA1\x00\x00"
FORMAT_VERSION = 1

_EMB_HEADER = struct.Struct("<IIQ")
_WGT_HEADER = struct.Struct("<IIIB3x")
_STA_HEADER = struct.Struct("<II")

# Chunk size for all raw reads; keeps memory bounded regardless of headers.
_READ_CHUNK = 1 << 20


def _read_exact(stream, n: int, what: str) -> bytes:
    """Read exactly n bytes or raise TruncationError."""
    parts = []
    remaining = n
    while remaining > 0:
        chunk = stream.read(min(remaining, _READ_CHUNK))
        if not chunk:
            raise TruncationError(
                f"stream ended while reading {what}: wanted {n} bytes, got {n - remaining}"
            )
        parts.append(chunk)
        remaining -= len(chunk)
    return b"".join(parts)


def _check_magic(stream, magic: bytes, name: str) -> None:
    got = stream.read(len(magic))
    if got != magic:
        raise FormatError(f"not an {name} container (magic {got!r})")


def _check_version(version: int, name: str) -> None:
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported {name} version {version}")


# ---------------------------------------------------------------------------
# NCEMB1 labeled embedding stream


@dataclass(eq=False)
class EmbeddingRecord:
    label: int
    vector: np.ndarray  # (dim,) float32

    def __eq__(self, other):
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.vector, other.vector)


def read_embedding_batches(source, batch_size: int = 4096):
    """Yield (labels, vectors) batches from an NCEMB1 stream.

    Header problems raise before the first batch.  Labels come back as
    uint32, vectors as float32 with shape (n, dim).  A record holding a
    non-finite value raises DataError naming the offending record index.
    """
    _check_magic(source, EMB_MAGIC, "NCEMB1")
    version, dim, declared = _EMB_HEADER.unpack(
        _read_exact(source, _EMB_HEADER.size, "NCEMB1 header")
    )
    _check_version(version, "NCEMB1")
    if dim == 0:
        raise FormatError("NCEMB1 dim must be >= 1")
    record_dtype = np.dtype([("label", "<u4"), ("vector", "<f4", (dim,))])
    record_size = record_dtype.itemsize

    def batches():
        seen = 0
        pending = b""
        while True:
            # pending is always shorter than one record, so this asks for a
            # full batch; memory stays bounded by batch_size regardless of
            # what the header declared.
            chunk = source.read(batch_size * record_size - len(pending))
            data = pending + chunk if pending else chunk
            if not data:
                break
            usable = len(data) - len(data) % record_size
            pending = data[usable:]
            if usable == 0:
                if not chunk:
                    break
                continue
            records = np.frombuffer(data[:usable], dtype=record_dtype)
            vectors = records["vector"]
            finite = np.isfinite(vectors).all(axis=1)
            if not finite.all():
                bad = seen + int(np.flatnonzero(~finite)[0])
                raise DataError(f"non-finite value in record {bad}")
            seen += len(records)
            yield records["label"], vectors
            if not chunk:
                break
        if pending:
            raise TruncationError(
                f"stream ended mid-record after {seen} records ({len(pending)} trailing bytes)"
            )
        if declared and seen < declared:
            raise TruncationError(f"header declared {declared} records, stream held {seen}")
        if declared and seen > declared:
            raise FormatError(f"header declared {declared} records, stream held {seen}")

    return dim, batches()


def read_embedding_stream(source):
    """Return (dim, iterator of EmbeddingRecord) for an NCEMB1 stream."""
    dim, batches = read_embedding_batches(source)

    def records():
        for labels, vectors in batches:
            for i in range(len(labels)):
                yield EmbeddingRecord(int(labels[i]), vectors[i].copy())

    return dim, records()


def write_embedding_stream(records, dim: int, declare_count: bool = True) -> bytes:
    """Serialize records to NCEMB1 bytes.

    Accepts EmbeddingRecord objects or (label, vector) pairs.  Vectors are
    stored as float32; pass float32 input for bit-exact round trips.  With
    declare_count=False the header advertises zero records (pipe mode).
    """
    body = io.BytesIO()
    count = 0
    for item in records:
        if isinstance(item, EmbeddingRecord):
            label, vector = item.label, item.vector
        else:
            label, vector = item
        vec = np.asarray(vector, dtype="<f4")
        if vec.shape != (dim,):
            raise DataError(f"record {count} has shape {vec.shape}, expected ({dim},)")
        if not np.isfinite(vec).all():
            raise DataError(f"non-finite value in record {count}")
        if not 0 <= int(label) < 1 << 32:
            raise DataError(f"record {count} label {label} out of range for u32")
        body.write(struct.pack("<I", int(label)))
        body.write(vec.tobytes())
        count += 1
    header = EMB_MAGIC + _EMB_HEADER.pack(FORMAT_VERSION, dim, count if declare_count else 0)
    return header + body.getvalue()


def write_embedding_batches(batches, dim: int, declare_count: bool = True) -> bytes:
    """Serialize (labels, vectors) batches to NCEMB1 bytes."""
    body = io.BytesIO()
    count = 0
    for labels, vectors in batches:
        labels = np.asarray(labels, dtype="<u4")
        vectors = np.asarray(vectors, dtype="<f4")
        if vectors.ndim != 2 or vectors.shape[1] != dim or len(labels) != len(vectors):
            raise DataError(f"batch shape mismatch: {labels.shape} labels, {vectors.shape} vectors")
        if not np.isfinite(vectors).all():
            bad = count + int(np.flatnonzero(~np.isfinite(vectors).all(axis=1))[0])
            raise DataError(f"non-finite value in record {bad}")
        out = np.empty(len(labels), dtype=np.dtype([("label", "<u4"), ("vector", "<f4", (dim,))]))
        out["label"] = labels
        out["vector"] = vectors
        body.write(out.tobytes())
        count += len(labels)
    header = EMB_MAGIC + _EMB_HEADER.pack(FORMAT_VERSION, dim, count if declare_count else 0)
    return header + body.getvalue()


# ---------------------------------------------------------------------------
# NCWGT1 classifier snapshot


@dataclass(eq=False)
class ClassifierSet:
    num_classes: int
    dim: int
    weights: np.ndarray  # (C, dim) float32
    biases: np.ndarray  # (C,) float32, zeros when the file carried none
    has_bias: bool

    def __eq__(self, other):
        if not isinstance(other, ClassifierSet):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and self.dim == other.dim
            and self.has_bias == other.has_bias
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.biases, other.biases)
        )


def read_classifier(source) -> ClassifierSet:
    _check_magic(source, WGT_MAGIC, "NCWGT1")
    version, num_classes, dim, has_bias = _WGT_HEADER.unpack(
        _read_exact(source, _WGT_HEADER.size, "NCWGT1 header")
    )
    _check_version(version, "NCWGT1")
    if num_classes == 0 or dim == 0:
        raise FormatError("NCWGT1 num_classes and dim must be >= 1")
    if has_bias not in (0, 1):
        raise FormatError(f"NCWGT1 has_bias must be 0 or 1, got {has_bias}")
    weight_bytes = _read_exact(source, num_classes * dim * 4, "NCWGT1 weights")
    weights = np.frombuffer(weight_bytes, dtype="<f4").reshape(num_classes, dim)
    if has_bias:
        bias_bytes = _read_exact(source, num_classes * 4, "NCWGT1 biases")
        biases = np.frombuffer(bias_bytes, dtype="<f4").copy()
    else:
        biases = np.zeros(num_classes, dtype="<f4")
    if source.read(1):
        raise FormatError("trailing bytes after NCWGT1 body")
    return ClassifierSet(num_classes, dim, weights.copy(), biases, bool(has_bias))


def write_classifier(classifiers: ClassifierSet) -> bytes:
    weights = np.ascontiguousarray(classifiers.weights, dtype="<f4")
    if weights.shape != (classifiers.num_classes, classifiers.dim):
        raise DataError(f"weight shape {weights.shape} does not match header fields")
    out = io.BytesIO()
    out.write(WGT_MAGIC)
    out.write(
        _WGT_HEADER.pack(
            FORMAT_VERSION, classifiers.num_classes, classifiers.dim, int(classifiers.has_bias)
        )
    )
    out.write(weights.tobytes())
    if classifiers.has_bias:
        biases = np.ascontiguousarray(classifiers.biases, dtype="<f4")
        if biases.shape != (classifiers.num_classes,):
            raise DataError(f"bias shape {biases.shape} does not match header fields")
        out.write(biases.tobytes())
    return out.getvalue()


# ---------------------------------------------------------------------------
# NCSTA1 statistics checkpoint


@dataclass(eq=False)
class StatsCheckpoint:
    """Per-class first and second moments.

    counts[c] is the number of samples seen for class c, means[c] their
    running mean, and m2[c] the summed squared deviation from that mean.
    m2 is zero whenever counts[c] <= 1 and never negative.
    """

    num_classes: int
    dim: int
    counts: np.ndarray  # (C,) uint64
    means: np.ndarray  # (C, dim) float64
    m2: np.ndarray  # (C,) float64

    def __eq__(self, other):
        if not isinstance(other, StatsCheckpoint):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and self.dim == other.dim
            and np.array_equal(self.counts, other.counts)
            and np.array_equal(self.means, other.means)
            and np.array_equal(self.m2, other.m2)
        )

    def variances(self) -> np.ndarray:
        """Unbiased per-class variance m2 / (count - 1); NaN where count < 2."""
        counts = self.counts.astype(np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(counts >= 2, self.m2 / np.maximum(counts - 1.0, 1.0), np.nan)
        return out


def read_stats(source) -> StatsCheckpoint:
    _check_magic(source, STA_MAGIC, "NCSTA1")
    version, num_classes, dim = struct.unpack(
        "<III", _read_exact(source, 12, "NCSTA1 header")
    )
    _check_version(version, "NCSTA1")
    if num_classes == 0 or dim == 0:
        raise FormatError("NCSTA1 num_classes and dim must be >= 1")
    class_dtype = np.dtype([("count", "<u8"), ("mean", "<f8", (dim,)), ("m2", "<f8")])
    body = _read_exact(source, num_classes * class_dtype.itemsize, "NCSTA1 body")
    if source.read(1):
        raise FormatError("trailing bytes after NCSTA1 body")
    table = np.frombuffer(body, dtype=class_dtype)
    counts = table["count"].copy()
    means = table["mean"].copy()
    m2 = table["m2"].copy()
    if not (np.isfinite(means).all() and np.isfinite(m2).all()):
        raise CorruptionError("non-finite value in statistics checkpoint")
    if (m2 < 0).any():
        bad = int(np.flatnonzero(m2 < 0)[0])
        raise CorruptionError(f"negative m2 for class {bad}")
    if (m2[counts <= 1] != 0).any():
        raise CorruptionError("nonzero m2 for a class with fewer than two samples")
    return StatsCheckpoint(num_classes, dim, counts, means, m2)


def write_stats(stats: StatsCheckpoint) -> bytes:
    class_dtype = np.dtype([("count", "<u8"), ("mean", "<f8", (stats.dim,)), ("m2", "<f8")])
    table = np.empty(stats.num_classes, dtype=class_dtype)
    table["count"] = stats.counts
    table["mean"] = stats.means
    table["m2"] = stats.m2
    header = STA_MAGIC + struct.pack("<III", FORMAT_VERSION, stats.num_classes, stats.dim)
    return header + table.tobytes()


# ---------------------------------------------------------------------------
# JSON metric report


@dataclass
class MetricStat:
    """One report entry: a summary of a value collection.

    Scalar metrics are carried the same way, with the value in ``mean``,
    null std/cov, and ``count`` naming the size of whatever collection the
    scalar was derived from.
    """

    mean: float | None
    std: float | None
    cov: float | None
    count: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "cov": self.cov, "count": self.count}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricStat":
        try:
            return cls(mean=d["mean"], std=d["std"], cov=d["cov"], count=int(d["count"]))
        except KeyError as e:
            raise FormatError(f"metric entry missing field {e}") from None


@dataclass
class MetricReport:
    num_classes: int
    dim: int
    included_classes: int
    min_count: int
    metrics: dict[str, MetricStat]
    provenance: dict
    version: int = FORMAT_VERSION


def write_report(report: MetricReport) -> bytes:
    obj = {
        "version": report.version,
        "num_classes": report.num_classes,
        "dim": report.dim,
        "included_classes": report.included_classes,
        "min_count": report.min_count,
        "metrics": {name: stat.to_dict() for name, stat in report.metrics.items()},
        "provenance": report.provenance,
    }
    return (json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n").encode()


def read_report(data: bytes | str) -> MetricReport:
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid report JSON: {e}") from None
    try:
        version = int(obj["version"])
        _check_version(version, "report")
        return MetricReport(
            version=version,
            num_classes=int(obj["num_classes"]),
            dim=int(obj["dim"]),
            included_classes=int(obj["included_classes"]),
            min_count=int(obj["min_count"]),
            metrics={k: MetricStat.from_dict(v) for k, v in obj["metrics"].items()},
            provenance=obj["provenance"],
        )
    except KeyError as e:
        raise FormatError(f"report missing field {e}") from None


# ---------------------------------------------------------------------------
# Run table CSV


@dataclass
class RunTable:
    """Rows of (run_id, named real columns) for cross-run analysis."""

    run_ids: list[str]
    columns: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.run_ids)


def read_run_table(text: str) -> RunTable:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("run table is empty") from None
    if not header or header[0] != "run_id":
        raise FormatError("run table must start with a run_id column")
    names = header[1:]
    if len(set(names)) != len(names):
        raise FormatError("run table has duplicate column names")
    run_ids: list[str] = []
    cells: list[list[float]] = [[] for _ in names]
    for row_num, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(f"run table row {row_num} has {len(row)} cells, expected {len(header)}")
        run_ids.append(row[0])
        for i, cell in enumerate(row[1:]):
            if cell == "":
                cells[i].append(np.nan)
                continue
            try:
                cells[i].append(float(cell))
            except ValueError:
                raise DataError(f"run table row {row_num}, column {names[i]!r}: {cell!r} is not a number") from None
    return RunTable(run_ids, {name: np.asarray(vals, dtype=np.float64) for name, vals in zip(names, cells)})


def write_run_table(table: RunTable) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    names = list(table.columns)
    writer.writerow(["run_id"] + names)
    for i, run_id in enumerate(table.run_ids):
        row = [run_id]
        for name in names:
            value = table.columns[name][i]
            row.append("" if np.isnan(value) else repr(float(value)))
        writer.writerow(row)
    return out.getvalue()
