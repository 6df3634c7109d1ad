"""Command-line pipeline around the library.

Subcommands mirror the processing stages: ``accumulate`` folds embedding
shards into a statistics checkpoint, ``metrics`` turns a checkpoint (plus
an optional classifier) into a metric report, ``agreement`` scores a
classifier against nearest-mean decisions on a validation stream,
``synth`` emits construction-pinned artifacts, ``permtest`` runs a
permutation test over a run table, and ``report`` collates report files
into one table.

Exit codes: 0 success, 2 usage, 3 malformed file, 4 inconsistent data,
5 degenerate input.  Failures print a one-object JSON diagnostic on
stderr; reports and tables are byte-stable across reruns (digests and
echoed configuration in provenance, no timestamps).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .accumulate import MultiClassAccumulator, finalize, global_mean_from_stats
from .agreement import agreement_rate
from .duality import duality_profile
from .errors import DataError, NcMeterError, UsageError
from .formats import (
    MetricReport,
    MetricStat,
    RunTable,
    read_classifier,
    read_embedding_batches,
    read_embedding_stream,
    read_report,
    read_run_table,
    read_stats,
    write_report,
    write_run_table,
    write_stats,
)
from .pairwise import (
    DEFAULT_TILE,
    build_geometry,
    cdnv_summary,
    interference_summary,
    logkernel_summary,
    norm_summary,
)
from .stats import permutation_test
from .summaries import ValueSummary
from .synth import GEOMETRIES, CLASSIFIER_MODES, SynthSpec, generate, make_instance, true_checkpoint

THREADS_ENV = "NC_METER_THREADS"


# ---------------------------------------------------------------------------
# small helpers


def _digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _provenance(inputs: dict[str, str], config: dict) -> dict:
    return {
        "inputs": {role: {"path": path, "sha256": _digest(path)} for role, path in inputs.items()},
        "tool_version": __version__,
        "config": config,
    }


def _from_summary(s: ValueSummary) -> MetricStat:
    return MetricStat(mean=s.mean, std=s.std, cov=s.cov(), count=s.count)


def _scalar(value: float | None, count: int) -> MetricStat:
    return MetricStat(mean=value, std=None, cov=None, count=count)


def _tally(n: int) -> MetricStat:
    return MetricStat(mean=float(n), std=None, cov=None, count=n)


def _write_json(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_bytes(text.encode())


def _resolve_workers(args) -> int:
    env = os.environ.get(THREADS_ENV)
    if env is not None:
        try:
            workers = int(env)
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    else:
        workers = args.workers
    if workers < 1:
        raise UsageError("worker count must be >= 1")
    return workers


# ---------------------------------------------------------------------------
# subcommands


def cmd_accumulate(args) -> int:
    acc: MultiClassAccumulator | None = None
    for path in args.input:
        with open(path, "rb") as f:
            dim, batches = read_embedding_batches(f, batch_size=args.batch)
            if acc is None:
                acc = MultiClassAccumulator(args.classes or 0, dim, grow=args.classes is None)
            elif dim != acc.dim:
                raise DataError(f"shard {path} has dim {dim}, earlier shards had {acc.dim}")
            for labels, vectors in batches:
                acc.update_batch(labels, vectors)
    assert acc is not None  # argparse enforces at least one --input
    stats, _, exclusions = finalize(acc, min_count=args.min_count)
    Path(args.out).write_bytes(write_stats(stats))
    _write_json(
        {
            "num_classes": stats.num_classes,
            "dim": stats.dim,
            "total_samples": int(stats.counts.sum()),
            "empty_classes": len(exclusions.empty_classes),
            "below_min_count": len(exclusions.below_min_count),
            "min_count": exclusions.min_count,
            "out": args.out,
        },
        None,
    )
    return 0


def cmd_metrics(args) -> int:
    workers = _resolve_workers(args)
    with open(args.stats, "rb") as f:
        stats = read_stats(f)
    geom = build_geometry(stats, global_mean_from_stats(stats), min_count=args.min_count)

    cdnv = cdnv_summary(geom, tile=args.tile, workers=workers)
    interf = interference_summary(geom, tile=args.tile, workers=workers)
    kernel = logkernel_summary(geom, tile=args.tile, workers=workers)
    norms = norm_summary(geom)

    metrics = {
        "cdnv": _from_summary(cdnv.raw),
        "cdnv_log10": _from_summary(cdnv.log10),
        "cdnv_degenerate_pairs": _tally(cdnv.degenerate_pairs),
        "cdnv_log_excluded_pairs": _tally(cdnv.log_excluded_pairs),
        "interference": _from_summary(interf.values),
        "interference_cov": _scalar(interf.values.cov(), interf.values.count),
        "interference_etf_gap": _scalar(interf.etf_gap, interf.values.count),
        "log_inv_dist": _from_summary(kernel.values),
        "log_inv_dist_cov": _scalar(kernel.values.cov(), kernel.values.count),
        "logkernel_coincident_pairs": _tally(kernel.coincident_pairs),
        "norm": _from_summary(norms.norms),
        "log_norm": _from_summary(norms.log_norms),
        "log_norm_cov": _scalar(norms.log_norms.cov(), norms.log_norms.count),
    }
    inputs = {"stats": args.stats}
    if args.weights:
        with open(args.weights, "rb") as f:
            classifiers = read_classifier(f)
        duality = duality_profile(geom, classifiers)
        metrics["self_duality"] = _from_summary(duality.alignment_summary)
        metrics["self_duality_cov"] = _scalar(duality.alignment_summary.cov(), duality.alignment_summary.count)
        metrics["duality_distance"] = _from_summary(duality.distance_summary)
        metrics["duality_dropped_zero_weight"] = _tally(len(duality.dropped_zero_weight))
        inputs["weights"] = args.weights

    report = MetricReport(
        num_classes=stats.num_classes,
        dim=stats.dim,
        included_classes=geom.num_included,
        min_count=args.min_count,
        metrics=metrics,
        provenance=_provenance(
            inputs, {"min_count": args.min_count, "tile": args.tile, "workers": workers}
        ),
    )
    Path(args.out).write_bytes(write_report(report))
    return 0


def cmd_agreement(args) -> int:
    with open(args.stats, "rb") as f:
        stats = read_stats(f)
    with open(args.weights, "rb") as f:
        classifiers = read_classifier(f)
    with open(args.val, "rb") as f:
        dim, records = read_embedding_stream(f)
        if dim != stats.dim:
            raise DataError(f"validation stream has dim {dim}, statistics carry {stats.dim}")
        result = agreement_rate(
            records, stats, classifiers, batch=args.batch, tile=args.tile
        )

    metrics = {
        "nc4_agreement": _scalar(result.rate, result.samples_evaluated),
        "nc4_samples": _tally(result.samples_evaluated),
        "nc4_ties": _tally(result.ties_total),
        "nc4_ties_linear": _tally(result.ties_linear),
        "nc4_ties_prototype": _tally(result.ties_prototype),
        "nc4_excluded_classes": _tally(result.excluded_classes),
        "nc4_candidate_classes": _tally(result.candidate_classes),
    }
    report = MetricReport(
        num_classes=stats.num_classes,
        dim=stats.dim,
        included_classes=result.candidate_classes,
        min_count=1,
        metrics=metrics,
        provenance=_provenance(
            {"stats": args.stats, "weights": args.weights, "val": args.val},
            {"batch": args.batch, "tile": args.tile},
        ),
    )
    Path(args.out).write_bytes(write_report(report))
    return 0


def _parse_samples(text: str) -> int | list[int]:
    try:
        if "," in text:
            return [int(part) for part in text.split(",")]
        return int(text)
    except ValueError:
        raise UsageError(f"samples-per-class must be an integer or comma list, got {text!r}") from None


def cmd_synth(args) -> int:
    spec = SynthSpec(
        num_classes=args.classes,
        dim=args.dim,
        samples_per_class=_parse_samples(args.samples_per_class),
        geometry=args.geometry,
        noise_sigma=args.noise,
        classifier_mode=args.classifier,
        seed=args.seed,
        mean_scale=args.mean_scale,
        perturbation=args.perturbation,
    )
    out = generate(spec)
    Path(args.out_emb).write_bytes(out.embeddings)
    Path(args.out_wgt).write_bytes(out.classifiers)
    if args.out_truth:
        _write_json(out.truth, args.out_truth)
    if args.out_stats:
        Path(args.out_stats).write_bytes(write_stats(true_checkpoint(make_instance(spec))))
    return 0


def cmd_permtest(args) -> int:
    table = read_run_table(Path(args.runs).read_text())
    for name in (args.metric, args.target):
        if name not in table.columns:
            raise UsageError(f"run table has no column {name!r}; columns: {sorted(table.columns)}")
    x = table.columns[args.metric]
    y = table.columns[args.target]
    keep = np.isfinite(x) & np.isfinite(y)
    outcome = permutation_test(x[keep], y[keep], trials=args.trials, seed=args.seed)
    _write_json(
        {
            "metric": args.metric,
            "target": args.target,
            "rows_used": int(keep.sum()),
            "rows_total": len(table),
            "observed_r2": outcome.observed_r2,
            "p_value": outcome.p_value,
            "p_value_unsmoothed": outcome.p_value_unsmoothed,
            "trials": outcome.trials,
            "exceed_count": outcome.exceed_count,
            "seed": outcome.seed,
            "generator": outcome.generator,
        },
        args.out,
    )
    return 0


def cmd_report(args) -> int:
    run_ids: list[str] = []
    rows: list[dict[str, float]] = []
    for path in args.reports:
        report = read_report(Path(path).read_bytes())
        run_id = Path(path).stem
        if run_id in run_ids:
            raise DataError(f"duplicate run id {run_id!r}; report file stems must be unique")
        run_ids.append(run_id)
        rows.append({name: stat.mean for name, stat in report.metrics.items()})

    names = sorted({name for row in rows for name in row})
    columns = {
        name: np.array(
            [row.get(name, np.nan) if row.get(name) is not None else np.nan for row in rows],
            dtype=np.float64,
        )
        for name in names
    }
    table = RunTable(run_ids=run_ids, columns=columns)
    if args.format == "csv":
        text = write_run_table(table)
    else:
        obj = {
            "run_ids": run_ids,
            "columns": {
                name: [None if np.isnan(v) else float(v) for v in col]
                for name, col in columns.items()
            },
        }
        text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return 0


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nc-meter", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"nc-meter {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("accumulate", help="fold embedding shards into a statistics checkpoint")
    p.add_argument("--input", action="append", required=True, help="embedding stream; repeatable")
    p.add_argument("--out", required=True, help="statistics checkpoint to write")
    p.add_argument("--classes", type=int, default=None, help="declared class count (default: grow)")
    p.add_argument("--min-count", type=int, default=2, help="exclusion threshold echoed in summary")
    p.add_argument("--batch", type=int, default=4096)
    p.set_defaults(func=cmd_accumulate)

    p = sub.add_parser("metrics", help="measure collapse metrics from a checkpoint")
    p.add_argument("--stats", required=True)
    p.add_argument("--weights", default=None, help="classifier weights for duality metrics")
    p.add_argument("--out", required=True, help="metric report JSON to write")
    p.add_argument("--min-count", type=int, default=2)
    p.add_argument("--tile", type=int, default=DEFAULT_TILE)
    p.add_argument("--workers", type=int, default=1, help=f"pair tiles in parallel; {THREADS_ENV} overrides")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("agreement", help="compare classifier and nearest-mean decisions")
    p.add_argument("--stats", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--val", required=True, help="validation embedding stream")
    p.add_argument("--out", required=True)
    p.add_argument("--batch", type=int, default=4096)
    p.add_argument("--tile", type=int, default=1024)
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("synth", help="emit synthetic artifacts with known geometry")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--samples-per-class", required=True, help="integer, or comma list per class")
    p.add_argument("--geometry", choices=GEOMETRIES, default="simplex_etf")
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--classifier", choices=CLASSIFIER_MODES, default="tied_to_means")
    p.add_argument("--perturbation", type=float, default=0.1)
    p.add_argument("--mean-scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-emb", required=True)
    p.add_argument("--out-wgt", required=True)
    p.add_argument("--out-truth", default=None)
    p.add_argument("--out-stats", default=None, help="exact checkpoint (noiseless specs only)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("permtest", help="permutation-test a metric column against a target")
    p.add_argument("--runs", required=True, help="run table CSV")
    p.add_argument("--metric", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="JSON output path (default stdout)")
    p.set_defaults(func=cmd_permtest)

    p = sub.add_parser("report", help="collate metric reports into one table")
    p.add_argument("reports", nargs="+", help="metric report JSON files")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse already printed the diagnostic
        return int(e.code or 0)
    try:
        return args.func(args)
    except NcMeterError as e:
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e)}) + "\n")
        return e.exit_code
    except OSError as e:
        sys.stderr.write(json.dumps({"error": "OSError", "message": str(e)}) + "\n")
        return 2


def entrypoint() -> None:
    sys.exit(main())
