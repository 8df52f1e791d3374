"""Pair-level faithfulness scores from the five probability series.

Public vector functions take probabilities (not logs). Inputs are clamped to
``[PROB_FLOOR, 1]`` so every logarithm is finite. Means use numpy's pairwise
summation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fflm.errors import EmptyInputError, InvalidWeightsError, LengthMismatchError

PROB_FLOOR = 1e-10
LOG_FLOOR = math.log(PROB_FLOOR)

# DeltaTriple.form values
FORM_WEIGHTED_LOG = "weighted-log"
FORM_WEIGHTED_RAW = "weighted-raw"
FORM_LOG = "log"
FORM_RAW = "raw"


def as_probs(values) -> np.ndarray:
    p = np.asarray(values, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise EmptyInputError("probability vector must be 1-d and non-empty")
    return np.clip(p, PROB_FLOOR, 1.0)


def logprobs_to_probs(logprobs) -> np.ndarray:
    return as_probs(np.exp(np.asarray(logprobs, dtype=np.float64)))


def _clamp_logs(logprobs) -> np.ndarray:
    lp = np.asarray(logprobs, dtype=np.float64)
    if lp.ndim != 1 or lp.size == 0:
        raise EmptyInputError("log-probability vector must be 1-d and non-empty")
    return np.clip(lp, LOG_FLOOR, 0.0)


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_probs(a), as_probs(b)
    if a.shape != b.shape:
        raise LengthMismatchError(f"lengths differ: {a.size} vs {b.size}")
    return a, b


@dataclass(frozen=True)
class MetricWeights:
    alpha: float
    beta: float
    delta: float

    def __post_init__(self):
        ws = (self.alpha, self.beta, self.delta)
        if not all(isinstance(w, (int, float)) and math.isfinite(w) for w in ws):
            raise InvalidWeightsError(f"weights must be finite reals: {ws}")
        if any(w < 0 or w > 1 for w in ws):
            raise InvalidWeightsError(f"each weight must lie in [0, 1]: {ws}")
        if abs(sum(ws) - 1.0) > 1e-9:
            raise InvalidWeightsError(f"weights must sum to 1: {ws}")

    @classmethod
    def parse(cls, text: str) -> MetricWeights:
        """Parse ``"a,b,d"``."""
        parts = text.split(",")
        if len(parts) != 3:
            raise InvalidWeightsError(f"expected three comma-separated weights, got {text!r}")
        try:
            return cls(*(float(p) for p in parts))
        except ValueError as exc:
            if isinstance(exc, InvalidWeightsError):
                raise
            raise InvalidWeightsError(f"not a number in {text!r}") from exc

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.delta)

    def to_json(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "delta": self.delta}


RATING_WEIGHTS = MetricWeights(0.25, 0.25, 0.5)


@dataclass(frozen=True)
class DeltaTriple:
    d_y_prior: float
    d_x_prior: float
    d_y_cond: float
    form: str = FORM_WEIGHTED_LOG

    def __post_init__(self):
        for name in ("d_y_prior", "d_x_prior", "d_y_cond"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} is not finite")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.d_y_prior, self.d_x_prior, self.d_y_cond)

    def to_json(self) -> dict:
        return {
            "d_y_prior": self.d_y_prior,
            "d_x_prior": self.d_x_prior,
            "d_y_cond": self.d_y_cond,
            "form": self.form,
        }

    @classmethod
    def from_json(cls, obj: dict) -> DeltaTriple:
        return cls(
            float(obj["d_y_prior"]),
            float(obj["d_x_prior"]),
            float(obj["d_y_cond"]),
            obj.get("form", FORM_WEIGHTED_LOG),
        )


@dataclass(frozen=True)
class AblationFlags:
    use_log: bool = True
    use_token_weights: bool = True

    @property
    def form(self) -> str:
        if self.use_log:
            return FORM_WEIGHTED_LOG if self.use_token_weights else FORM_LOG
        return FORM_WEIGHTED_RAW if self.use_token_weights else FORM_RAW

    def to_json(self) -> dict:
        return {"use_log": self.use_log, "use_token_weights": self.use_token_weights}


@dataclass(frozen=True)
class MetricScores:
    deltas_raw: DeltaTriple
    deltas_weighted: DeltaTriple
    fflm: float
    cop: float
    harim: float
    avg_logprob: float
    weights: MetricWeights
    ablation: AblationFlags

    def to_json(self) -> dict:
        return {
            "deltas_raw": self.deltas_raw.to_json(),
            "deltas_weighted": self.deltas_weighted.to_json(),
            "fflm": self.fflm,
            "cop": self.cop,
            "harim": self.harim,
            "avg_logprob": self.avg_logprob,
            "weights": self.weights.to_json(),
            "ablation": self.ablation.to_json(),
        }


# -- vector operations ----------------------------------------------------------

def delta_prior_raw(p_s2s, p_other) -> float:
    """Mean probability gain of the conditioned series over the other one."""
    a, b = _pair(p_s2s, p_other)
    return float(np.mean(a - b))


def delta_cond_raw(p_s2s, p_pref) -> float:
    a, b = _pair(p_s2s, p_pref)
    return float(np.mean(a - b))


def delta_weighted(p_s2s, p_other) -> float:
    """``mean(exp(p_s2s) * (log p_s2s - log p_other))``."""
    a, b = _pair(p_s2s, p_other)
    return float(np.mean(np.exp(a) * (np.log(a) - np.log(b))))


def fflm(deltas: DeltaTriple, weights: MetricWeights) -> float:
    if not isinstance(weights, MetricWeights):
        raise InvalidWeightsError("weights must be a MetricWeights")
    return (
        weights.alpha * deltas.d_y_prior
        + weights.beta * deltas.d_x_prior
        + weights.delta * deltas.d_y_cond
    )


def cop(p_s2s, p_pref) -> float:
    a, b = _pair(p_s2s, p_pref)
    return float(np.mean(np.log(a) - np.log(b)))


def harim(p_s2s, p_lm) -> float:
    a, b = _pair(p_s2s, p_lm)
    return float(np.mean((1.0 - a) * (1.0 - (a - b))))


def avg_logprob(p_s2s) -> float:
    return float(np.mean(np.log(as_probs(p_s2s))))


# -- pair scoring ---------------------------------------------------------------

def _ablated_delta(lp_s2s: np.ndarray, lp_other: np.ndarray, flags: AblationFlags) -> float:
    # logs come straight from the backend; probabilities only where needed
    if lp_s2s.shape != lp_other.shape:
        raise LengthMismatchError(f"lengths differ: {lp_s2s.size} vs {lp_other.size}")
    p_s2s = np.exp(lp_s2s)
    diff = lp_s2s - lp_other if flags.use_log else p_s2s - np.exp(lp_other)
    if flags.use_token_weights:
        diff = np.exp(p_s2s) * diff
    return float(np.mean(diff))


def score_pair(bundle, weights: MetricWeights = RATING_WEIGHTS, ablation: AblationFlags | None = None) -> MetricScores:
    """All pair-level scores for a :class:`~fflm.extraction.PairProbBundle`.

    ``deltas_weighted`` holds the deltas in the form selected by ``ablation``
    (both flags on by default) and ``fflm`` combines those; ``deltas_raw``
    always holds the plain probability differences.
    """
    ablation = ablation or AblationFlags()
    lp = {
        name: _clamp_logs(getattr(bundle, name).logprobs)
        for name in ("p_y_lm", "p_y_s2s", "p_y_pref", "p_x_lm", "p_x_s2s")
    }
    p = {name: np.exp(v) for name, v in lp.items()}

    raw = DeltaTriple(
        delta_prior_raw(p["p_y_s2s"], p["p_y_lm"]),
        delta_prior_raw(p["p_x_s2s"], p["p_x_lm"]),
        delta_cond_raw(p["p_y_s2s"], p["p_y_pref"]),
        form=FORM_RAW,
    )
    weighted = DeltaTriple(
        _ablated_delta(lp["p_y_s2s"], lp["p_y_lm"], ablation),
        _ablated_delta(lp["p_x_s2s"], lp["p_x_lm"], ablation),
        _ablated_delta(lp["p_y_s2s"], lp["p_y_pref"], ablation),
        form=ablation.form,
    )
    return MetricScores(
        deltas_raw=raw,
        deltas_weighted=weighted,
        fflm=fflm(weighted, weights),
        cop=float(np.mean(lp["p_y_s2s"] - lp["p_y_pref"])),
        harim=harim(p["p_y_s2s"], p["p_y_lm"]),
        avg_logprob=float(np.mean(lp["p_y_s2s"])),
        weights=weights,
        ablation=ablation,
    )
