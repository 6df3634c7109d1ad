"""Streaming collapse-geometry measurement for classification heads.

The library folds labeled embedding streams into per-class first and
second moments, then measures the geometry those moments pin down:
variance-to-separation ratios, direction interference against the tight
simplex bound, pairwise log-kernel uniformity, classifier-to-mean
alignment, and decision agreement between the linear rule and the
nearest class mean.  Everything runs at vocabulary scale without ever
holding a class-by-class matrix in memory.
"""

from .accumulate import (
    ClassAccumulator,
    ExclusionReport,
    GlobalMean,
    MultiClassAccumulator,
    accumulate_batches,
    finalize,
    global_mean_from_stats,
    merge_tree,
)
from .agreement import AgreementResult, agreement_rate
from .duality import DualityProfile, duality_profile
from .errors import (
    CorruptionError,
    DataError,
    DegenerateInputError,
    FormatError,
    NcMeterError,
    TruncationError,
    UsageError,
)
from .formats import (
    ClassifierSet,
    EmbeddingRecord,
    MetricReport,
    MetricStat,
    RunTable,
    StatsCheckpoint,
    read_classifier,
    read_embedding_batches,
    read_embedding_stream,
    read_report,
    read_run_table,
    read_stats,
    write_classifier,
    write_embedding_batches,
    write_embedding_stream,
    write_report,
    write_run_table,
    write_stats,
)
from .pairwise import (
    CdnvSummary,
    CenteredGeometry,
    InterferenceSummary,
    LogKernelSummary,
    NormSummary,
    build_geometry,
    cdnv_summary,
    interference_summary,
    logkernel_summary,
    norm_summary,
)
from .stats import PermutationOutcome, cov, permutation_test, r_squared
from .summaries import SummaryReducer, ValueSummary, summarize
from .synth import SynthOutput, SynthSpec, generate, ground_truth, make_instance, stream_bytes, true_checkpoint

__version__ = "0.1.0"

__all__ = [
    "AgreementResult",
    "CdnvSummary",
    "CenteredGeometry",
    "ClassAccumulator",
    "ClassifierSet",
    "CorruptionError",
    "DataError",
    "DegenerateInputError",
    "DualityProfile",
    "EmbeddingRecord",
    "ExclusionReport",
    "FormatError",
    "GlobalMean",
    "InterferenceSummary",
    "LogKernelSummary",
    "MetricReport",
    "MetricStat",
    "MultiClassAccumulator",
    "NcMeterError",
    "NormSummary",
    "PermutationOutcome",
    "RunTable",
    "StatsCheckpoint",
    "SummaryReducer",
    "SynthOutput",
    "SynthSpec",
    "TruncationError",
    "UsageError",
    "ValueSummary",
    "accumulate_batches",
    "agreement_rate",
    "build_geometry",
    "cdnv_summary",
    "cov",
    "duality_profile",
    "finalize",
    "generate",
    "global_mean_from_stats",
    "ground_truth",
    "interference_summary",
    "logkernel_summary",
    "make_instance",
    "merge_tree",
    "norm_summary",
    "permutation_test",
    "r_squared",
    "read_classifier",
    "read_embedding_batches",
    "read_embedding_stream",
    "read_report",
    "read_run_table",
    "read_stats",
    "stream_bytes",
    "summarize",
    "true_checkpoint",
    "write_classifier",
    "write_embedding_batches",
    "write_embedding_stream",
    "write_report",
    "write_run_table",
    "write_stats",
]
