"""Assemble the five probability series for one (document, summary) pair.

Calls issued per pair (``sep`` is the separator, ``j`` the prefix joiner)::

    p_y_lm    ""                 -> Y
    p_y_s2s   X + sep            -> Y
    p_y_pref  Y + j + X + sep    -> Y
    p_x_lm    ""                 -> X
    p_x_s2s   Y + sep            -> X

Budgets are counted in whitespace tokens. The longest input is the prefixed
call, so the document gets ``budget - 2*len(Y) - len(sep) - len(j)`` tokens.
"""

from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import asdict, dataclass, field

from fflm.backend import Backend, ScoreRequest, TokenProbSeries, score_target
from fflm.errors import BackendError, BudgetExceededError, EmptyInputError, ProtocolViolationError

TRUNCATE_TAIL = "truncate-document-tail"
TRUNCATE_ERROR = "error"

SERIES_NAMES = ("p_y_lm", "p_y_s2s", "p_y_pref", "p_x_lm", "p_x_s2s")


@dataclass(frozen=True)
class ExtractionConfig:
    separator: str = "\nTL;DR\n"
    prefix_joiner: str = "\n"
    context_budget: int = 2048
    truncation_policy: str = TRUNCATE_TAIL

    def __post_init__(self):
        if not self.separator:
            raise ValueError("separator must be non-empty")
        if self.context_budget < 16:
            raise ValueError("context_budget must be >= 16")
        if self.truncation_policy not in (TRUNCATE_TAIL, TRUNCATE_ERROR):
            raise ValueError(f"unknown truncation policy {self.truncation_policy!r}")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BundleMeta:
    model_id: str
    truncated: bool
    doc_tokens_original: int
    doc_tokens_retained: int


@dataclass(frozen=True)
class PairProbBundle:
    p_y_lm: TokenProbSeries
    p_y_s2s: TokenProbSeries
    p_y_pref: TokenProbSeries
    p_x_lm: TokenProbSeries
    p_x_s2s: TokenProbSeries
    meta: BundleMeta = field(default_factory=lambda: BundleMeta("", False, 0, 0))

    def __post_init__(self):
        m = {len(self.p_y_lm), len(self.p_y_s2s), len(self.p_y_pref)}
        if len(m) != 1:
            raise ProtocolViolationError(f"summary series lengths differ: {sorted(m)}")
        n = {len(self.p_x_lm), len(self.p_x_s2s)}
        if len(n) != 1:
            raise ProtocolViolationError(f"document series lengths differ: {sorted(n)}")
        for name in ("p_y_lm", "p_y_s2s", "p_y_pref"):
            if getattr(self, name).tokens != self.p_y_lm.tokens:
                raise ProtocolViolationError(f"{name} tokenizes the summary differently")
        if self.p_x_s2s.tokens != self.p_x_lm.tokens:
            raise ProtocolViolationError("p_x_s2s tokenizes the document differently")


def truncate_document(doc_tokens: list, budget: int) -> list:
    if budget < 0:
        raise ValueError("budget must be >= 0")
    return list(doc_tokens[:budget])


def _n_tokens(text: str) -> int:
    return len(text.split())


def build_requests(
    document: str, summary: str, config: ExtractionConfig, model_id: str = ""
) -> tuple[dict[str, ScoreRequest], BundleMeta]:
    """The five requests for a pair, after budget enforcement."""
    if not document.strip():
        raise EmptyInputError("document is empty")
    if not summary.strip():
        raise EmptyInputError("summary is empty")

    doc_tokens = document.split()
    overhead = 2 * _n_tokens(summary) + _n_tokens(config.separator) + _n_tokens(config.prefix_joiner)
    doc_budget = config.context_budget - overhead
    if doc_budget < 1:
        raise BudgetExceededError(
            f"summary and separator need {overhead} of {config.context_budget} tokens; "
            "no room left for the document"
        )
    truncated = len(doc_tokens) > doc_budget
    if truncated:
        if config.truncation_policy == TRUNCATE_ERROR:
            raise BudgetExceededError(
                f"document has {len(doc_tokens)} tokens; budget allows {doc_budget}"
            )
        document = " ".join(truncate_document(doc_tokens, doc_budget))

    sep, joiner = config.separator, config.prefix_joiner
    requests = {
        "p_y_lm": ScoreRequest("", summary, model_id),
        "p_y_s2s": ScoreRequest(document + sep, summary, model_id),
        "p_y_pref": ScoreRequest(summary + joiner + document + sep, summary, model_id),
        "p_x_lm": ScoreRequest("", document, model_id),
        "p_x_s2s": ScoreRequest(summary + sep, document, model_id),
    }
    meta = BundleMeta(
        model_id=model_id,
        truncated=truncated,
        doc_tokens_original=len(doc_tokens),
        doc_tokens_retained=min(len(doc_tokens), doc_budget),
    )
    return requests, meta


def _fetch(name: str, request: ScoreRequest, backend: Backend) -> TokenProbSeries:
    try:
        return score_target(request, backend)
    except BackendError as exc:
        exc.call = name
        exc.args = (f"[{name}] {exc}",)
        raise


def build_pair_bundle(
    document: str,
    summary: str,
    config: ExtractionConfig,
    backend: Backend,
    model_id: str = "",
    executor: Executor | None = None,
) -> PairProbBundle:
    """Fetch the five series for (document, summary).

    With ``executor`` the calls run concurrently; the result does not depend on
    completion order.
    """
    requests, meta = build_requests(document, summary, config, model_id)
    if executor is None:
        series = {name: _fetch(name, req, backend) for name, req in requests.items()}
    else:
        futures = {name: executor.submit(_fetch, name, req, backend) for name, req in requests.items()}
        series = {name: futures[name].result() for name in SERIES_NAMES}
    return PairProbBundle(**series, meta=meta)
