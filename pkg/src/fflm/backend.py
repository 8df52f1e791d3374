"""Scoring backends: given conditioning text and a target, return the target's
tokens with one natural-log probability each (teacher forcing).

Three implementations share the ``score(request)`` method:

* :class:`HttpBackend` talks to an inference server over the ``/score`` wire
  protocol.
* :class:`SyntheticBackend` is a deterministic pseudo-LM used for tests and
  offline experiments.
* :class:`CachedBackend` serves from a :class:`ReplayStore` and optionally
  falls through to another backend on a miss.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import requests

from fflm import _kernels
from fflm.errors import (
    BackendError,
    BackendUnreachableError,
    InvalidRequestError,
    ProtocolViolationError,
    ReplayMissError,
    StoreIOError,
)

logger = logging.getLogger(__name__)

TOKEN_ENV_VAR = "FFLM_BACKEND_TOKEN"


@dataclass(frozen=True)
class ScoreRequest:
    conditioning: str
    target: str
    model_id: str = ""

    def __post_init__(self):
        if not isinstance(self.target, str) or not self.target.split():
            raise InvalidRequestError("target must contain non-whitespace text")
        if not isinstance(self.conditioning, str):
            raise InvalidRequestError("conditioning must be a string")
        if not isinstance(self.model_id, str):
            raise InvalidRequestError("model_id must be a string")

    def canonical_bytes(self) -> bytes:
        """Field-ordered, length-prefixed UTF-8 serialization."""
        parts = []
        for value in (self.model_id, self.conditioning, self.target):
            raw = value.encode("utf-8")
            parts.append(b"%d:" % len(raw) + raw)
        return b"".join(parts)

    def key(self) -> str:
        return hashlib.sha256(self.canonical_bytes()).hexdigest()

    def to_json(self) -> dict:
        return {"model": self.model_id, "conditioning": self.conditioning, "target": self.target}


@dataclass(frozen=True)
class TokenProbSeries:
    tokens: tuple[str, ...]
    logprobs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "logprobs", tuple(float(v) for v in self.logprobs))
        if len(self.tokens) != len(self.logprobs):
            raise ProtocolViolationError(
                f"{len(self.tokens)} tokens but {len(self.logprobs)} logprobs"
            )
        if not self.tokens:
            raise ProtocolViolationError("empty series")
        for i, lp in enumerate(self.logprobs):
            if not math.isfinite(lp) or lp > 0.0:
                raise ProtocolViolationError(f"logprob[{i}]={lp!r} is not a finite value <= 0")

    def __len__(self) -> int:
        return len(self.tokens)

    def to_json(self) -> dict:
        return {"tokens": list(self.tokens), "logprobs": list(self.logprobs)}

    @classmethod
    def from_json(cls, obj: dict) -> TokenProbSeries:
        tokens = obj.get("tokens")
        logprobs = obj.get("logprobs")
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            raise ProtocolViolationError("'tokens' must be a list of strings")
        if not isinstance(logprobs, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in logprobs
        ):
            raise ProtocolViolationError("'logprobs' must be a list of numbers")
        return cls(tokens, logprobs)


@dataclass(frozen=True)
class ReplayRecord:
    key: str
    request: ScoreRequest
    series: TokenProbSeries

    @classmethod
    def build(cls, request: ScoreRequest, series: TokenProbSeries) -> ReplayRecord:
        return cls(request.key(), request, series)

    def to_line(self) -> str:
        obj = {"key": self.key, "request": self.request.to_json(), "series": self.series.to_json()}
        return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_line(cls, line: str) -> ReplayRecord:
        obj = json.loads(line)
        req = obj["request"]
        request = ScoreRequest(req["conditioning"], req["target"], req["model"])
        record = cls(obj["key"], request, TokenProbSeries.from_json(obj["series"]))
        if record.key != request.key():
            raise ValueError("stored key does not match request hash")
        return record


class Backend(Protocol):
    def score(self, request: ScoreRequest) -> TokenProbSeries: ...


def score_target(request: ScoreRequest, backend: Backend) -> TokenProbSeries:
    """Score ``request.target`` given ``request.conditioning`` on ``backend``.

    Whatever the backend returns is re-validated, so a backend that hands back
    raw lists instead of a :class:`TokenProbSeries` is still checked.
    """
    series = backend.score(request)
    if not isinstance(series, TokenProbSeries):
        series = TokenProbSeries.from_json(series)
    return series


# -- HTTP ---------------------------------------------------------------------

class HttpBackend:
    """Client for ``POST {base_url}/score``.

    The bearer token, if any, comes from ``FFLM_BACKEND_TOKEN`` unless passed
    explicitly.
    """

    def __init__(self, base_url: str, token: str | None = None, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.token = token if token is not None else os.environ.get(TOKEN_ENV_VAR) or None
        self.timeout = timeout
        self.calls = 0
        self._lock = threading.Lock()

    def score(self, request: ScoreRequest) -> TokenProbSeries:
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        with self._lock:
            self.calls += 1
        try:
            resp = requests.post(
                f"{self.base_url}/score",
                json=request.to_json(),
                headers=headers,
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise BackendUnreachableError(f"{self.base_url}: {exc}") from exc
        if resp.status_code != 200:
            raise BackendError(f"{self.base_url}/score returned HTTP {resp.status_code}")
        try:
            body = resp.json()
        except ValueError as exc:
            raise ProtocolViolationError("response body is not JSON") from exc
        if not isinstance(body, dict):
            raise ProtocolViolationError("response body is not a JSON object")
        if not isinstance(body.get("model"), str):
            raise ProtocolViolationError("response lacks a string 'model' field")
        return TokenProbSeries.from_json(body)


# -- synthetic ----------------------------------------------------------------

SYNTH_WINDOW = 8
SYNTH_BASE = -3.0
SYNTH_SPAN = 2.5
SYNTH_BOOST = 1.5
SYNTH_CEILING = -0.05


def synthetic_hash(seed: int, window: list[str] | tuple[str, ...], token: str) -> int:
    """64-bit FNV-1a over (seed, context window, token).

    Whitespace-split tokens never contain the 0x1e/0x1f separators, so the
    encoding is unambiguous.
    """
    data = (
        (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
        + "\x1f".join(window).encode("utf-8")
        + b"\x1e"
        + token.encode("utf-8")
    )
    return _kernels.fnv1a64(data)


def synthetic_score(request: ScoreRequest, seed: int) -> TokenProbSeries:
    """Deterministic pseudo-LM.

    Each whitespace token of the target gets ``-3 + 2.5*u`` with ``u`` a hash
    draw over the last 8 preceding tokens, plus 1.5 if the token (case-folded)
    appears among the conditioning tokens; capped at -0.05.
    """
    context = request.conditioning.split()
    present = {t.casefold() for t in context}
    tokens = request.target.split()
    logprobs = []
    for tok in tokens:
        window = context[-SYNTH_WINDOW:]
        u = synthetic_hash(seed, window, tok) / 2.0**64
        boost = SYNTH_BOOST if tok.casefold() in present else 0.0
        logprobs.append(min(SYNTH_BASE + SYNTH_SPAN * u + boost, SYNTH_CEILING))
        context.append(tok)
    return TokenProbSeries(tokens, logprobs)


class SyntheticBackend:
    def __init__(self, seed: int = 0):
        self.seed = seed
        self.calls = 0
        self._lock = threading.Lock()

    def score(self, request: ScoreRequest) -> TokenProbSeries:
        with self._lock:
            self.calls += 1
        return synthetic_score(request, self.seed)


# -- replay -------------------------------------------------------------------

class ReplayStore:
    """Append-only JSON-lines store of :class:`ReplayRecord`.

    ``mode="r"`` never writes; ``mode="rw"`` creates the file if needed.
    Appends are serialized by a lock; lookups are plain dict reads.
    """

    def __init__(self, path: str | os.PathLike, mode: str = "rw"):
        if mode not in ("r", "rw"):
            raise ValueError(f"mode must be 'r' or 'rw', not {mode!r}")
        self.path = Path(path)
        self.mode = mode
        self._records: dict[str, ReplayRecord] = {}
        self._lock = threading.Lock()
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            if self.mode == "r":
                raise StoreIOError(f"{self.path}: replay store does not exist")
            return
        try:
            fh = open(self.path, encoding="utf-8")
        except OSError as exc:
            raise StoreIOError(f"{self.path}: {exc}") from exc
        with fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = ReplayRecord.from_line(line)
                except Exception as exc:
                    raise StoreIOError(f"{self.path}:{lineno}: corrupt record ({exc})") from exc
                self._records[record.key] = record

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, key: str) -> bool:
        return key in self._records

    def lookup(self, key: str) -> TokenProbSeries | None:
        record = self._records.get(key)
        return None if record is None else record.series

    def append(self, record: ReplayRecord) -> None:
        if self.mode == "r":
            raise StoreIOError(f"{self.path}: store opened read-only")
        line = record.to_line() + "\n"
        with self._lock:
            if record.key in self._records:
                return
            try:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(line)
            except OSError as exc:
                raise StoreIOError(f"{self.path}: {exc}") from exc
            self._records[record.key] = record


def cache_lookup_or_fetch(
    request: ScoreRequest, store: ReplayStore, backend: Backend | None
) -> TokenProbSeries:
    """Serve ``request`` from ``store``; on a miss fetch from ``backend`` and record it."""
    key = request.key()
    hit = store.lookup(key)
    if hit is not None:
        return hit
    if store.mode == "r" or backend is None:
        raise ReplayMissError(f"no replay record for key {key[:16]}...")
    series = score_target(request, backend)
    store.append(ReplayRecord(key, request, series))
    return series


class CachedBackend:
    """Backend facade over a replay store; ``inner=None`` means replay-only."""

    def __init__(self, store: ReplayStore, inner: Backend | None = None):
        self.store = store
        self.inner = inner
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def score(self, request: ScoreRequest) -> TokenProbSeries:
        hit = request.key() in self.store
        with self._lock:
            if hit:
                self.hits += 1
            else:
                self.misses += 1
        return cache_lookup_or_fetch(request, self.store, self.inner)
