"""Evaluation protocols.

Detection: balanced accuracy with a validation-tuned threshold (predict
consistent when ``score >= threshold``), plus a grid search over the FFLM
combination weights. Rating: Pearson / Spearman / Kendall tau-b at summary or
system level, and the per-error-type subsample analysis.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from fflm import _kernels
from fflm.datasets import ERROR_TYPES
from fflm.errors import (
    DegenerateInputError,
    EmptyFaithfulPoolError,
    EmptyValidationError,
    InsufficientExamplesError,
    LengthMismatchError,
    MissingSystemIdError,
    SingleClassLabelsError,
    TooFewSystemsError,
)
from fflm.metrics import MetricWeights

logger = logging.getLogger(__name__)

PEARSON = "pearson"
SPEARMAN = "spearman"
KENDALL = "kendall"
CORRELATIONS = (PEARSON, SPEARMAN, KENDALL)


def encode_float(x: float):
    """JSON-safe float: infinities become the strings ``"inf"``/``"-inf"``."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def decode_float(x) -> float:
    return float(x)


# -- detection ------------------------------------------------------------------

def _binary(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-d")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError(f"{name} must be binary (0/1)")
    return arr.astype(np.int64)


def _check_labels(labels, n: int | None = None) -> np.ndarray:
    y = _binary(labels, "labels")
    if y.size == 0:
        raise EmptyValidationError("no examples")
    if n is not None and y.size != n:
        raise LengthMismatchError(f"{n} scores but {y.size} labels")
    if y.min() == y.max():
        raise SingleClassLabelsError("labels contain a single class")
    return y


def confusion(labels, predictions) -> tuple[int, int, int, int]:
    """``(tp, fp, tn, fn)`` with 1 (consistent) as the positive class."""
    y = _binary(labels, "labels")
    p = _binary(predictions, "predictions")
    if y.size != p.size:
        raise LengthMismatchError(f"{y.size} labels but {p.size} predictions")
    tp = int(np.sum((y == 1) & (p == 1)))
    fp = int(np.sum((y == 0) & (p == 1)))
    tn = int(np.sum((y == 0) & (p == 0)))
    fn = int(np.sum((y == 1) & (p == 0)))
    return tp, fp, tn, fn


def ba_from_counts(tp: int, fp: int, tn: int, fn: int) -> float:
    return (tp / (tp + fn) + tn / (tn + fp)) / 2


def balanced_accuracy(labels, predictions) -> float:
    y = _binary(labels, "labels")
    p = _binary(predictions, "predictions")
    if y.size == 0:
        raise EmptyValidationError("no examples")
    if y.size != p.size:
        raise LengthMismatchError(f"{y.size} labels but {p.size} predictions")
    if y.min() == y.max():
        raise SingleClassLabelsError("labels contain a single class")
    return ba_from_counts(*confusion(y, p))


def _scores(values, n: int | None = None) -> np.ndarray:
    s = np.asarray(values, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError("scores must be 1-d")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if n is not None and s.size != n:
        raise LengthMismatchError(f"{s.size} scores but {n} labels")
    return s


def select_threshold(scores, labels) -> tuple[float, float]:
    """Exhaustive threshold search; returns ``(threshold, balanced_accuracy)``.

    Candidates are -inf, the midpoints of consecutive distinct sorted scores,
    and +inf. Ties in balanced accuracy go to the smallest threshold.
    """
    y = _check_labels(labels)
    s = _scores(scores, y.size)
    return _kernels.sweep_threshold(s, y)


def predict(scores, threshold: float) -> np.ndarray:
    return (np.asarray(scores, dtype=np.float64) >= threshold).astype(np.int64)


@dataclass(frozen=True)
class DetectionReport:
    threshold: float
    weights: MetricWeights
    balanced_accuracy: float
    tp: int
    fp: int
    tn: int
    fn: int

    def to_json(self) -> dict:
        return {
            "threshold": encode_float(self.threshold),
            "weights": self.weights.to_json(),
            "balanced_accuracy": self.balanced_accuracy,
            "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "n": self.tp + self.fp + self.tn + self.fn,
        }


def detection_report(scores, labels, threshold: float, weights: MetricWeights) -> DetectionReport:
    y = _check_labels(labels)
    s = _scores(scores, y.size)
    tp, fp, tn, fn = confusion(y, predict(s, threshold))
    return DetectionReport(threshold, weights, ba_from_counts(tp, fp, tn, fn), tp, fp, tn, fn)


def weight_grid(step: float = 0.1) -> list[MetricWeights]:
    """All (alpha, beta, delta) on the simplex grid, in lexicographic order."""
    k = round(1.0 / step)
    if k < 1 or abs(k * step - 1.0) > 1e-9:
        raise ValueError(f"step {step} does not divide 1 evenly")
    return [
        MetricWeights(a / k, b / k, (k - a - b) / k)
        for a in range(k + 1)
        for b in range(k + 1 - a)
    ]


@dataclass(frozen=True)
class GridSearchResult:
    weights: MetricWeights
    threshold: float
    balanced_accuracy: float
    n_combos: int


def grid_search_weights(val_deltas, val_labels, step: float = 0.1) -> GridSearchResult:
    """Pick the combination weights with the best validation balanced accuracy.

    ``val_deltas`` is a sequence of :class:`~fflm.metrics.DeltaTriple` (or
    3-tuples). Ties keep the lexicographically smallest weights.
    """
    if len(val_deltas) == 0:
        raise EmptyValidationError("empty validation set")
    d = np.array(
        [v.as_tuple() if hasattr(v, "as_tuple") else tuple(v) for v in val_deltas],
        dtype=np.float64,
    )
    y = _check_labels(val_labels, len(d))
    grid = weight_grid(step)
    best = None
    for w in grid:
        scores = w.alpha * d[:, 0] + w.beta * d[:, 1] + w.delta * d[:, 2]
        t, ba = _kernels.sweep_threshold(scores, y)
        if best is None or ba > best[2]:
            best = (w, t, ba)
    logger.info("evaluated %d weight combinations", len(grid))
    return GridSearchResult(best[0], best[1], best[2], len(grid))


# -- correlation ----------------------------------------------------------------

def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInputError("correlation undefined for a constant input")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def _kendall_tau_b(x: np.ndarray, y: np.ndarray) -> float:
    s, tx, ty, n0 = _kernels.kendall_counts(x, y)
    denom = (n0 - tx) * (n0 - ty)
    if denom == 0:
        raise DegenerateInputError("tau-b undefined for a constant input")
    return max(-1.0, min(1.0, s / math.sqrt(denom)))


def correlate(x, y, kind: str = PEARSON) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
        raise LengthMismatchError(f"lengths differ: {x.size} vs {y.size}")
    if x.size < 2:
        raise DegenerateInputError("need at least two points")
    if kind == PEARSON:
        return _pearson(x, y)
    if kind == SPEARMAN:
        return _pearson(rankdata(x, method="average"), rankdata(y, method="average"))
    if kind == KENDALL:
        return _kendall_tau_b(x, y)
    raise ValueError(f"unknown correlation {kind!r}")


@dataclass(frozen=True)
class CorrelationReport:
    pearson: float
    spearman: float
    kendall: float
    level: str
    n: int
    scores: tuple[float, ...] = field(default=(), repr=False)
    ratings: tuple[float, ...] = field(default=(), repr=False)
    systems: tuple[str, ...] = field(default=(), repr=False)

    def to_json(self) -> dict:
        obj = {
            "level": self.level,
            "n": self.n,
            "pearson": self.pearson,
            "spearman": self.spearman,
            "kendall": self.kendall,
            "scores": list(self.scores),
            "ratings": list(self.ratings),
        }
        if self.systems:
            obj["systems"] = list(self.systems)
        return obj


def summary_level_report(scores, ratings) -> CorrelationReport:
    s = np.asarray(scores, dtype=np.float64)
    r = np.asarray(ratings, dtype=np.float64)
    return CorrelationReport(
        pearson=correlate(s, r, PEARSON),
        spearman=correlate(s, r, SPEARMAN),
        kendall=correlate(s, r, KENDALL),
        level="summary",
        n=int(s.size),
        scores=tuple(s.tolist()),
        ratings=tuple(r.tolist()),
    )


def system_level_report(scores, ratings, systems) -> CorrelationReport:
    """Correlate per-system mean scores with per-system mean ratings."""
    if len(scores) != len(ratings) or len(scores) != len(systems):
        raise LengthMismatchError("scores, ratings and systems must align")
    if any(sys_id is None or sys_id == "" for sys_id in systems):
        raise MissingSystemIdError("every example needs a system id")
    names = sorted(set(systems))
    if len(names) < 2:
        raise TooFewSystemsError(f"need at least 2 systems, got {len(names)}")
    s = np.asarray(scores, dtype=np.float64)
    r = np.asarray(ratings, dtype=np.float64)
    ids = np.asarray(systems, dtype=object)
    mean_s = np.array([s[ids == name].mean() for name in names])
    mean_r = np.array([r[ids == name].mean() for name in names])
    return CorrelationReport(
        pearson=correlate(mean_s, mean_r, PEARSON),
        spearman=correlate(mean_s, mean_r, SPEARMAN),
        kendall=correlate(mean_s, mean_r, KENDALL),
        level="system",
        n=len(names),
        scores=tuple(mean_s.tolist()),
        ratings=tuple(mean_r.tolist()),
        systems=tuple(names),
    )


# -- error-type analysis --------------------------------------------------------

@dataclass(frozen=True)
class ErrorTypeResult:
    error_type: str
    mean_spearman: float
    per_repeat: tuple[float, ...]
    degenerate_repeats: int
    n_tagged: int
    overlap: int

    def to_json(self) -> dict:
        return {
            "error_type": self.error_type,
            "mean_spearman": self.mean_spearman,
            "per_repeat": list(self.per_repeat),
            "degenerate_repeats": self.degenerate_repeats,
            "n_tagged": self.n_tagged,
            "overlap": self.overlap,
        }


def error_type_analysis(
    examples,
    scores,
    n_per_type: int = 50,
    repeats: int = 10,
    seed: int = 0,
    types=ERROR_TYPES,
) -> dict[str, ErrorTypeResult]:
    """Spearman between scores and a faithful(1)/error(0) target, per error type.

    Faithful examples are those without ``error_types``. Each repeat samples
    ``n_per_type`` examples tagged with the type (without replacement) and
    adds the whole faithful pool. Each (type, repeat) draw has its own
    generator seeded from ``(seed, type index, repeat)``, so results do not
    depend on evaluation order. A repeat whose scores are constant counts as 0
    and is tallied in ``degenerate_repeats``. ``overlap`` is the number of
    tagged examples that also carry another type; they are not excluded.
    """
    if len(examples) != len(scores):
        raise LengthMismatchError("examples and scores must align")
    s = np.asarray(scores, dtype=np.float64)
    faithful = [i for i, ex in enumerate(examples) if not ex.error_types]
    if not faithful:
        raise EmptyFaithfulPoolError("no faithful (untagged) examples")

    results = {}
    for t_index, etype in enumerate(ERROR_TYPES):
        if etype not in types:
            continue
        tagged = [i for i, ex in enumerate(examples) if ex.error_types and etype in ex.error_types]
        if len(tagged) < n_per_type:
            raise InsufficientExamplesError(
                f"{etype}: {len(tagged)} tagged examples, need {n_per_type}"
            )
        overlap = sum(1 for i in tagged if len(examples[i].error_types) > 1)
        target = np.concatenate([np.ones(len(faithful)), np.zeros(n_per_type)])
        values = []
        degenerate = 0
        for rep in range(repeats):
            rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, t_index, rep])
            drawn = rng.choice(np.asarray(tagged), size=n_per_type, replace=False)
            idx = np.concatenate([np.asarray(faithful), drawn])
            try:
                values.append(correlate(s[idx], target, SPEARMAN))
            except DegenerateInputError:
                values.append(0.0)
                degenerate += 1
        results[etype] = ErrorTypeResult(
            error_type=etype,
            mean_spearman=float(np.mean(values)) if values else 0.0,
            per_repeat=tuple(values),
            degenerate_repeats=degenerate,
            n_tagged=len(tagged),
            overlap=overlap,
        )
    return results
