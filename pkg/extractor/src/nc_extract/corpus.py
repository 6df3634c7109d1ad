"""Token-id corpora stored as JSONL splits.

A corpus is a directory holding one ``<split>.jsonl`` file per split;
each line is a JSON array of non-negative integer token ids (one
document).  Documents are concatenated in file order and the combined
stream is cut into fixed-length chunks, so document boundaries do not
survive packing — the same convention causal LM training uses.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, UsageError


def load_split(corpus: str, split: str) -> list[np.ndarray]:
    """Read one split as a list of int64 id arrays, one per document."""
    path = Path(corpus) / f"{split}.jsonl"
    if not path.is_file():
        have = sorted(p.stem for p in Path(corpus).glob("*.jsonl"))
        raise UsageError(
            f"corpus has no split {split!r} (expected {path}; available: {have or 'none'})"
        )
    docs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                ids = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"{path.name} line {lineno}: not JSON ({e.msg})") from None
            if not isinstance(ids, list) or not all(
                isinstance(t, int) and not isinstance(t, bool) and t >= 0 for t in ids
            ):
                raise FormatError(
                    f"{path.name} line {lineno}: expected an array of non-negative token ids"
                )
            docs.append(np.asarray(ids, dtype=np.int64))
    return docs


def pack_chunks(docs, chunk_len: int, max_seqs: int | None = None) -> np.ndarray:
    """Concatenate documents and cut into (num_chunks, chunk_len) rows.

    Tokens past the last full chunk are dropped.  max_seqs keeps only the
    first chunks, which bounds work without touching the packing itself.
    """
    if chunk_len < 2:
        raise UsageError("chunk length must be >= 2 (a context position needs a next token)")
    if max_seqs is not None and max_seqs < 1:
        raise UsageError("max sequences must be >= 1")
    flat = np.concatenate([np.asarray(d, dtype=np.int64) for d in docs]) if docs else np.empty(0, np.int64)
    num_chunks = len(flat) // chunk_len
    if num_chunks == 0:
        raise DataError(
            f"split holds {len(flat)} tokens, not enough for one chunk of {chunk_len}"
        )
    if max_seqs is not None:
        num_chunks = min(num_chunks, max_seqs)
    return flat[: num_chunks * chunk_len].reshape(num_chunks, chunk_len)
