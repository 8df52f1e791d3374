"""Zero-shot summary faithfulness scores from language-model probability changes."""

__version__ = "0.1.0"

from fflm.backend import (  # noqa: E402
    CachedBackend,
    HttpBackend,
    ReplayRecord,
    ReplayStore,
    ScoreRequest,
    SyntheticBackend,
    TokenProbSeries,
    cache_lookup_or_fetch,
    score_target,
    synthetic_score,
)
from fflm.extraction import ExtractionConfig, PairProbBundle, build_pair_bundle  # noqa: E402
from fflm.metrics import AblationFlags, DeltaTriple, MetricScores, MetricWeights, score_pair  # noqa: E402

__all__ = [
    "AblationFlags",
    "CachedBackend",
    "DeltaTriple",
    "ExtractionConfig",
    "HttpBackend",
    "MetricScores",
    "MetricWeights",
    "PairProbBundle",
    "ReplayRecord",
    "ReplayStore",
    "ScoreRequest",
    "SyntheticBackend",
    "TokenProbSeries",
    "build_pair_bundle",
    "cache_lookup_or_fetch",
    "score_pair",
    "score_target",
    "synthetic_score",
]
