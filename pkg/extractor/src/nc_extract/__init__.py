"""Turn a causal LM checkpoint into inputs for the collapse-metric engine.

The extractor packs a token-id corpus into fixed-length chunks, runs the
model over them, and writes two files: an NCEMB1 stream pairing each
context position's final hidden state with the next token as its label,
and an NCWGT1 snapshot of the unembedding matrix.  Those are exactly the
inputs ``nc-meter`` accumulates and measures.
"""

from .corpus import load_split, pack_chunks
from .errors import DataError, FormatError, NcExtractError, UsageError
from .extract import CAPTURE_POINTS, ExtractionJob, ExtractionResult, extract
from .formats import EMB_MAGIC, FORMAT_VERSION, WGT_MAGIC, EmbeddingWriter, write_classifier

__version__ = "0.1.0"

__all__ = [
    "CAPTURE_POINTS",
    "DataError",
    "EMB_MAGIC",
    "EmbeddingWriter",
    "ExtractionJob",
    "ExtractionResult",
    "FORMAT_VERSION",
    "FormatError",
    "NcExtractError",
    "UsageError",
    "WGT_MAGIC",
    "extract",
    "load_split",
    "pack_chunks",
    "write_classifier",
]
