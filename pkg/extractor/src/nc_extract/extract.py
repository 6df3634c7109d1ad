"""Pull next-token geometry out of a causal language-model checkpoint.

For every context position t in a packed chunk the model's last hidden
state is paired with the token at t+1, giving one labeled embedding per
prediction the model actually makes.  The unembedding matrix (and bias,
when the head has one) goes out alongside as the classifier snapshot, so
``logits = W @ h + b`` can be reproduced from the two files alone.

The hidden state can be taken at either side of the final normalization
layer: ``after`` (the vector the unembedding actually sees — the logits
identity above holds only here) or ``before`` (the raw residual stream,
which the model's output tuple does not expose, so it is captured with a
forward pre-hook on the normalization module).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from transformers import AutoModelForCausalLM

from .corpus import load_split, pack_chunks
from .errors import DataError, UsageError
from .formats import EmbeddingWriter, write_classifier

CAPTURE_POINTS = ("after", "before")

# Attribute names the common decoder trunks use for their final norm.
_FINAL_NORM_ATTRS = ("ln_f", "final_layer_norm", "final_layernorm", "norm")


@dataclass
class ExtractionJob:
    checkpoint: str
    corpus: str
    out_emb: str
    out_wgt: str
    split: str = "train"
    chunk_len: int = 128
    max_seqs: int | None = None
    batch: int = 8
    capture: str = "after"

    def validate(self) -> None:
        if self.batch < 1:
            raise UsageError("batch size must be >= 1")
        if self.capture not in CAPTURE_POINTS:
            raise UsageError(f"capture must be one of {CAPTURE_POINTS}, got {self.capture!r}")
        # chunk_len and max_seqs are checked where packing happens


@dataclass
class ExtractionResult:
    records: int
    chunks: int
    dim: int
    num_classes: int
    has_bias: bool
    capture: str


def _final_norm(model) -> torch.nn.Module:
    base = model.base_model
    for name in _FINAL_NORM_ATTRS:
        module = getattr(base, name, None)
        if isinstance(module, torch.nn.Module):
            return module
    raise UsageError(
        "cannot locate the final normalization layer on this architecture; "
        "capture=before needs one of: " + ", ".join(_FINAL_NORM_ATTRS)
    )


def extract(job: ExtractionJob) -> ExtractionResult:
    """Run a job end to end, writing the embedding stream and classifier."""
    job.validate()
    chunks = pack_chunks(load_split(job.corpus, job.split), job.chunk_len, job.max_seqs)
    num_chunks, chunk_len = chunks.shape

    try:
        model = AutoModelForCausalLM.from_pretrained(job.checkpoint).eval()
    except (OSError, ValueError) as e:
        raise UsageError(f"cannot load checkpoint {job.checkpoint}: {e}") from None
    head = model.get_output_embeddings()
    if head is None or not hasattr(head, "weight"):
        raise UsageError("checkpoint exposes no output embedding layer to snapshot")
    weights = head.weight.detach().cpu().numpy()
    bias = getattr(head, "bias", None)
    num_classes, dim = weights.shape
    top = int(chunks.max())
    if top >= num_classes:
        raise DataError(
            f"corpus holds token id {top} but the unembedding has {num_classes} rows"
        )

    captured: dict[str, torch.Tensor] = {}
    hook = None
    if job.capture == "before":
        hook = _final_norm(model).register_forward_pre_hook(
            lambda module, args: captured.__setitem__("states", args[0])
        )
    try:
        with open(job.out_emb, "wb") as sink:
            writer = EmbeddingWriter(sink, dim, declared_count=num_chunks * (chunk_len - 1))
            for start in range(0, num_chunks, job.batch):
                ids = torch.from_numpy(chunks[start : start + job.batch])
                with torch.no_grad():
                    out = model(ids, output_hidden_states=job.capture == "after")
                # hidden_states[-1] is the post-norm vector feeding the head
                states = out.hidden_states[-1] if job.capture == "after" else captured.pop("states")
                if states.shape[-1] != dim:
                    raise DataError(
                        f"hidden states have dim {states.shape[-1]}, unembedding expects {dim}"
                    )
                vectors = states[:, :-1, :].reshape(-1, dim).numpy().astype(np.float32, copy=False)
                labels = chunks[start : start + job.batch, 1:].reshape(-1).astype(np.uint32)
                writer.append(labels, vectors)
            records = writer.finish()
    finally:
        if hook is not None:
            hook.remove()

    with open(job.out_wgt, "wb") as sink:
        write_classifier(
            sink, weights, None if bias is None else bias.detach().cpu().numpy()
        )
    return ExtractionResult(
        records=records,
        chunks=num_chunks,
        dim=dim,
        num_classes=num_classes,
        has_bias=bias is not None,
        capture=job.capture,
    )
