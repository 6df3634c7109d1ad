"""Container round trips, golden bytes, and malformed-input handling."""

import io
import json
import pathlib
import struct

import numpy as np
import pytest

from nc_meter import formats
from nc_meter.errors import (
    CorruptionError,
    DataError,
    FormatError,
    TruncationError,
)

GOLDEN = pathlib.Path(__file__).parent / "golden"


def read_emb(data: bytes):
    dim, records = formats.read_embedding_stream(io.BytesIO(data))
    return dim, list(records)


# ---------------------------------------------------------------------------
# NCEMB1


def test_emb_golden_bytes_write():
    rec = formats.EmbeddingRecord(3, np.array([1.0, 2.0], dtype=np.float32))
    expected = b"NCEMB1\x00\x00" + struct.pack("<IIQ", 1, 2, 1) + struct.pack("<Iff", 3, 1.0, 2.0)
    assert formats.write_embedding_stream([rec], dim=2) == expected
    assert expected == (GOLDEN / "emb_single.bin").read_bytes()


def test_emb_golden_bytes_read():
    dim, records = read_emb((GOLDEN / "emb_single.bin").read_bytes())
    assert dim == 2
    assert records == [formats.EmbeddingRecord(3, np.array([1.0, 2.0], dtype=np.float32))]


def test_emb_single_record_roundtrip():
    rec = formats.EmbeddingRecord(7, np.array([0.5, -1.25, 3.0], dtype=np.float32))
    dim, got = read_emb(formats.write_embedding_stream([rec], dim=3))
    assert dim == 3 and got == [rec]


def test_emb_roundtrip_many_random():
    rng = np.random.default_rng(11)
    for _ in range(250):
        n = int(rng.integers(0, 40))
        d = int(rng.integers(1, 12))
        recs = [
            formats.EmbeddingRecord(
                int(rng.integers(0, 1 << 20)),
                rng.standard_normal(d).astype(np.float32),
            )
            for _ in range(n)
        ]
        dim, got = read_emb(formats.write_embedding_stream(recs, dim=d))
        assert dim == d and got == recs


def test_emb_batched_reader_matches_record_reader():
    rng = np.random.default_rng(3)
    labels = rng.integers(0, 50, size=1000).astype(np.uint32)
    vectors = rng.standard_normal((1000, 5)).astype(np.float32)
    data = formats.write_embedding_batches([(labels, vectors)], dim=5)
    dim, batches = formats.read_embedding_batches(io.BytesIO(data), batch_size=64)
    got_labels, got_vectors = zip(*batches)
    assert dim == 5
    assert np.array_equal(np.concatenate(got_labels), labels)
    assert np.array_equal(np.concatenate(got_vectors), vectors)


def test_emb_declared_count_short_is_truncation():
    rec = struct.pack("<Iff", 0, 1.0, 2.0)
    data = b"NCEMB1\x00\x00" + struct.pack("<IIQ", 1, 2, 2) + rec
    with pytest.raises(TruncationError):
        read_emb(data)


def test_emb_declared_count_zero_is_pipe_mode():
    rec = formats.EmbeddingRecord(1, np.array([1.0], dtype=np.float32))
    data = formats.write_embedding_stream([rec, rec], dim=1, declare_count=False)
    assert struct.unpack("<Q", data[16:24]) == (0,)
    dim, got = read_emb(data)
    assert len(got) == 2


def test_emb_extra_records_beyond_declared():
    rec = struct.pack("<If", 0, 1.0)
    data = b"NCEMB1\x00\x00" + struct.pack("<IIQ", 1, 1, 1) + rec + rec
    with pytest.raises(FormatError):
        read_emb(data)


def test_emb_partial_trailing_record():
    rec = struct.pack("<Iff", 0, 1.0, 2.0)
    data = b"NCEMB1\x00\x00" + struct.pack("<IIQ", 1, 2, 0) + rec + rec[:5]
    with pytest.raises(TruncationError):
        read_emb(data)


def test_emb_bad_magic():
    with pytest.raises(FormatError):
        read_emb(b"NCEMB2\x00\x00" + struct.pack("<IIQ", 1, 2, 0))


def test_emb_bad_version():
    with pytest.raises(FormatError):
        read_emb(b"NCEMB1\x00\x00" + struct.pack("<IIQ", 9, 2, 0))


def test_emb_nonfinite_payload_names_record():
    recs = [(0, np.array([1.0], dtype=np.float32)) for _ in range(5)]
    data = bytearray(formats.write_embedding_stream(recs, dim=1))
    # overwrite record 3's payload with NaN
    offset = 24 + 3 * 8 + 4
    data[offset : offset + 4] = struct.pack("<f", float("nan"))
    with pytest.raises(DataError, match="record 3"):
        read_emb(bytes(data))


def test_emb_writer_rejects_nonfinite():
    with pytest.raises(DataError):
        formats.write_embedding_stream([(0, np.array([np.inf], dtype=np.float32))], dim=1)


def test_emb_huge_declared_count_fails_without_allocation():
    # a hostile header declares 10**9 records but carries one; the reader
    # must fail from what it read, not from trying to reserve space
    data = b"NCEMB1\x00\x00" + struct.pack("<IIQ", 1, 2, 10**9) + struct.pack("<Iff", 0, 1.0, 2.0)
    with pytest.raises(TruncationError):
        read_emb(data)


# ---------------------------------------------------------------------------
# NCWGT1


def test_wgt_golden_identity_no_bias():
    expected = (
        b"NCWGT1\x00\x00"
        + struct.pack("<IIIB3x", 1, 2, 2, 0)
        + struct.pack("<ffff", 1.0, 0.0, 0.0, 1.0)
    )
    assert expected == (GOLDEN / "wgt_identity.bin").read_bytes()
    got = formats.read_classifier(io.BytesIO(expected))
    assert got.num_classes == 2 and got.dim == 2
    assert np.array_equal(got.weights, np.eye(2, dtype=np.float32))
    # absent biases read as zeros
    assert got.has_bias is False
    assert np.array_equal(got.biases, np.zeros(2, dtype=np.float32))
    assert formats.write_classifier(got) == expected


def test_wgt_golden_bias_preserved():
    expected = (
        b"NCWGT1\x00\x00"
        + struct.pack("<IIIB3x", 1, 2, 3, 1)
        + struct.pack("<6f", 1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
        + struct.pack("<2f", 0.5, -0.5)
    )
    assert expected == (GOLDEN / "wgt_bias.bin").read_bytes()
    got = formats.read_classifier(io.BytesIO(expected))
    assert got.has_bias is True
    assert np.array_equal(got.biases, np.array([0.5, -0.5], dtype=np.float32))
    assert formats.write_classifier(got) == expected


def test_wgt_roundtrip_random():
    rng = np.random.default_rng(29)
    for _ in range(250):
        c = int(rng.integers(1, 30))
        d = int(rng.integers(1, 20))
        has_bias = bool(rng.integers(0, 2))
        cs = formats.ClassifierSet(
            num_classes=c,
            dim=d,
            weights=rng.standard_normal((c, d)).astype(np.float32),
            biases=rng.standard_normal(c).astype(np.float32)
            if has_bias
            else np.zeros(c, dtype=np.float32),
            has_bias=has_bias,
        )
        got = formats.read_classifier(io.BytesIO(formats.write_classifier(cs)))
        assert got == cs


def test_wgt_truncated_weights():
    data = (GOLDEN / "wgt_identity.bin").read_bytes()[:-3]
    with pytest.raises(TruncationError):
        formats.read_classifier(io.BytesIO(data))


def test_wgt_trailing_bytes():
    data = (GOLDEN / "wgt_identity.bin").read_bytes() + b"\x00"
    with pytest.raises(FormatError):
        formats.read_classifier(io.BytesIO(data))


def test_wgt_bad_magic():
    with pytest.raises(FormatError):
        formats.read_classifier(io.BytesIO(b"NCSTA1\x00\x00" + b"\x00" * 16))


# ---------------------------------------------------------------------------
# NCSTA1


def test_sta_golden_stream_123():
    # class 0 carries the hand-checked stream {1,2,3}: mean 2, m2 = 1+0+1 = 2
    expected = (
        b"NCSTA1\x00\x00"
        + struct.pack("<III", 1, 2, 1)
        + struct.pack("<Qdd", 3, 2.0, 2.0)
        + struct.pack("<Qdd", 0, 0.0, 0.0)
    )
    assert expected == (GOLDEN / "sta_tiny.bin").read_bytes()
    got = formats.read_stats(io.BytesIO(expected))
    assert got.num_classes == 2 and got.dim == 1
    assert got.counts.tolist() == [3, 0]
    assert got.means.tolist() == [[2.0], [0.0]]
    assert got.m2.tolist() == [2.0, 0.0]
    # unbiased variance of {1,2,3} is 1; undefined for the empty class
    v = got.variances()
    assert v[0] == 1.0 and np.isnan(v[1])
    assert formats.write_stats(got) == expected


def test_sta_roundtrip_random_doubles_bit_exact():
    rng = np.random.default_rng(17)
    for _ in range(250):
        c = int(rng.integers(1, 40))
        d = int(rng.integers(1, 16))
        counts = rng.integers(0, 1000, size=c).astype(np.uint64)
        means = rng.standard_normal((c, d))
        m2 = np.where(counts >= 2, np.abs(rng.standard_normal(c)), 0.0)
        sta = formats.StatsCheckpoint(c, d, counts, means, m2)
        got = formats.read_stats(io.BytesIO(formats.write_stats(sta)))
        assert got == sta


def test_sta_negative_m2_is_corruption():
    data = (
        b"NCSTA1\x00\x00"
        + struct.pack("<III", 1, 1, 1)
        + struct.pack("<Qdd", 5, 0.0, -0.001)
    )
    with pytest.raises(CorruptionError):
        formats.read_stats(io.BytesIO(data))


def test_sta_m2_nonzero_with_single_sample_is_corruption():
    data = (
        b"NCSTA1\x00\x00"
        + struct.pack("<III", 1, 1, 1)
        + struct.pack("<Qdd", 1, 0.0, 0.5)
    )
    with pytest.raises(CorruptionError):
        formats.read_stats(io.BytesIO(data))


def test_sta_nonfinite_mean_is_corruption():
    data = (
        b"NCSTA1\x00\x00"
        + struct.pack("<III", 1, 1, 1)
        + struct.pack("<Qdd", 5, float("nan"), 1.0)
    )
    with pytest.raises(CorruptionError):
        formats.read_stats(io.BytesIO(data))


def test_sta_truncated_body():
    data = (GOLDEN / "sta_tiny.bin").read_bytes()[:-8]
    with pytest.raises(TruncationError):
        formats.read_stats(io.BytesIO(data))


# ---------------------------------------------------------------------------
# metric report JSON


def _stat(rng):
    mean = float(rng.standard_normal())
    std = abs(float(rng.standard_normal()))
    return formats.MetricStat(
        mean=mean,
        std=std,
        cov=None if abs(mean) < 0.5 else std / abs(mean),
        count=int(rng.integers(1, 10000)),
    )


def test_report_empty_metrics_is_valid():
    report = formats.MetricReport(
        num_classes=3, dim=2, included_classes=0, min_count=2, metrics={}, provenance={}
    )
    got = formats.read_report(formats.write_report(report))
    assert got == report


def test_report_single_metric_has_all_stat_fields():
    report = formats.MetricReport(
        num_classes=3,
        dim=2,
        included_classes=3,
        min_count=2,
        metrics={"cdnv": formats.MetricStat(mean=0.25, std=0.0, cov=0.0, count=3)},
        provenance={"tool_version": "0.1.0"},
    )
    obj = json.loads(formats.write_report(report))
    assert set(obj["metrics"]["cdnv"]) == {"mean", "std", "cov", "count"}
    assert obj["metrics"]["cdnv"]["mean"] == 0.25


def test_report_keys_sorted_and_no_nan():
    report = formats.MetricReport(
        num_classes=1,
        dim=1,
        included_classes=1,
        min_count=1,
        metrics={"b": formats.MetricStat(1.0, 0.0, None, 1), "a": formats.MetricStat(2.0, 0.0, None, 1)},
        provenance={"z": 1, "a": 2},
    )
    text = formats.write_report(report).decode()
    assert text.index('"a"') < text.index('"b"')
    obj = json.loads(text)
    assert list(obj["metrics"]) == ["a", "b"]
    with pytest.raises(ValueError):
        formats.write_report(
            formats.MetricReport(1, 1, 1, 1, {"x": formats.MetricStat(float("nan"), 0.0, None, 1)}, {})
        )


def test_report_roundtrip_random():
    rng = np.random.default_rng(5)
    names = ["cdnv", "cdnv_log10", "norm", "interference", "self_duality", "nc4_agreement"]
    for _ in range(250):
        metrics = {name: _stat(rng) for name in rng.choice(names, size=rng.integers(0, 6), replace=False)}
        report = formats.MetricReport(
            num_classes=int(rng.integers(1, 1000)),
            dim=int(rng.integers(1, 512)),
            included_classes=int(rng.integers(0, 1000)),
            min_count=int(rng.integers(1, 5)),
            metrics=metrics,
            provenance={"config": {"seed": int(rng.integers(0, 99))}},
        )
        assert formats.read_report(formats.write_report(report)) == report


def test_report_write_is_deterministic():
    report = formats.MetricReport(
        num_classes=2, dim=2, included_classes=2, min_count=2,
        metrics={"norm": formats.MetricStat(1.5, 0.1, 0.066, 2)},
        provenance={"input_digests": {"a": "00"}},
    )
    assert formats.write_report(report) == formats.write_report(report)


def test_report_missing_field_rejected():
    with pytest.raises(FormatError):
        formats.read_report(b'{"version": 1}')
    with pytest.raises(FormatError):
        formats.read_report(b"{not json")


# ---------------------------------------------------------------------------
# run table CSV


def test_run_table_roundtrip():
    table = formats.RunTable(
        run_ids=["run-a", "run-b", "run-c"],
        columns={
            "cdnv_log10": np.array([0.5, -1.25, 2.0]),
            "val_loss": np.array([3.1, 2.9, np.nan]),
        },
    )
    text = formats.write_run_table(table)
    got = formats.read_run_table(text)
    assert got.run_ids == table.run_ids
    assert list(got.columns) == list(table.columns)
    for name in table.columns:
        assert np.array_equal(got.columns[name], table.columns[name], equal_nan=True)


def test_run_table_header_and_decimal_format():
    table = formats.RunTable(run_ids=["r0"], columns={"m": np.array([0.1])})
    text = formats.write_run_table(table)
    assert text.splitlines()[0] == "run_id,m"
    assert text.splitlines()[1] == "r0,0.1"


def test_run_table_requires_run_id_column():
    with pytest.raises(FormatError):
        formats.read_run_table("metric,target\n1,2\n")


def test_run_table_rejects_non_numeric():
    with pytest.raises(DataError):
        formats.read_run_table("run_id,m\nr0,abc\n")


def test_run_table_rejects_ragged_rows():
    with pytest.raises(FormatError):
        formats.read_run_table("run_id,m\nr0,1,2\n")
