"""Command-line front end: one checkpoint plus one corpus in, two files out.

Exit codes: 0 success, 2 usage, 3 malformed corpus, 4 inconsistent data.
Failures print a one-object JSON diagnostic on stderr; success prints a
small JSON summary of what was written on stdout.  Output files depend
only on the checkpoint, the corpus, and the flags, so a rerun reproduces
them byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import NcExtractError
from .extract import CAPTURE_POINTS, ExtractionJob, extract


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nc-extract",
        description="dump next-token hidden states and the unembedding from a causal LM",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--checkpoint", required=True, help="model directory (config + weights)")
    parser.add_argument("--corpus", required=True, help="directory of <split>.jsonl token-id files")
    parser.add_argument("--split", default="train")
    parser.add_argument("--chunk-len", type=int, default=128)
    parser.add_argument("--max-seqs", type=int, default=None, help="cap on packed chunks")
    parser.add_argument("--batch", type=int, default=8, help="chunks per forward pass")
    parser.add_argument(
        "--capture",
        choices=CAPTURE_POINTS,
        default="after",
        help="take hidden states after or before the final normalization",
    )
    parser.add_argument("--out-emb", required=True, help="embedding stream output path")
    parser.add_argument("--out-wgt", required=True, help="classifier snapshot output path")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse already printed the diagnostic
        return int(e.code or 0)
    job = ExtractionJob(
        checkpoint=args.checkpoint,
        corpus=args.corpus,
        out_emb=args.out_emb,
        out_wgt=args.out_wgt,
        split=args.split,
        chunk_len=args.chunk_len,
        max_seqs=args.max_seqs,
        batch=args.batch,
        capture=args.capture,
    )
    try:
        result = extract(job)
    except NcExtractError as e:
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e)}) + "\n")
        return e.exit_code
    except OSError as e:
        sys.stderr.write(json.dumps({"error": "OSError", "message": str(e)}) + "\n")
        return 2
    summary = {
        "records": result.records,
        "chunks": result.chunks,
        "dim": result.dim,
        "classes": result.num_classes,
        "has_bias": result.has_bias,
        "capture": result.capture,
        "out_emb": args.out_emb,
        "out_wgt": args.out_wgt,
    }
    sys.stdout.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return 0


def entrypoint() -> None:
    sys.exit(main())
