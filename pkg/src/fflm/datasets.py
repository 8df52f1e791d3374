"""Canonical JSON-lines evaluation data.

One object per line::

    {"id": "a", "dataset": "d", "split": "val"|"test",
     "document": "...", "summary": "...",
     "label": 0|1            # detection files (1 = consistent)
     "rating": 3.5           # rating files
     "system": "M8",         # optional
     "error_types": ["Sem"]} # optional, subset of Sem/Disc/CVer

Each line carries exactly one of ``label``/``rating``, and a file is uniform.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from fflm.errors import DatasetParseError, ModeMismatchError, SchemaError

DETECTION = "detection"
RATING = "rating"
SPLITS = ("val", "test")
ERROR_TYPES = ("Sem", "Disc", "CVer")

_REQUIRED = ("id", "dataset", "split", "document", "summary")
_OPTIONAL = ("label", "rating", "system", "error_types")


@dataclass(frozen=True)
class EvalExample:
    id: str
    dataset: str
    split: str
    document: str
    summary: str
    label: int | None = None
    rating: float | None = None
    system: str | None = None
    error_types: tuple[str, ...] | None = None

    def to_json(self) -> dict:
        obj = {
            "id": self.id,
            "dataset": self.dataset,
            "split": self.split,
            "document": self.document,
            "summary": self.summary,
        }
        if self.label is not None:
            obj["label"] = self.label
        if self.rating is not None:
            obj["rating"] = self.rating
        if self.system is not None:
            obj["system"] = self.system
        if self.error_types is not None:
            obj["error_types"] = list(self.error_types)
        return obj


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    path: str
    mode: str
    counts: dict[str, int]


def _check_str(obj: dict, key: str, where: str) -> str:
    value = obj[key]
    if not isinstance(value, str):
        raise SchemaError(f"{where}: field {key!r} must be a string")
    return value


def _parse_example(obj, where: str) -> EvalExample:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected a JSON object")
    missing = [k for k in _REQUIRED if k not in obj]
    if missing:
        raise SchemaError(f"{where}: missing field(s) {', '.join(missing)}")
    extra = sorted(set(obj) - set(_REQUIRED) - set(_OPTIONAL))
    if extra:
        raise SchemaError(f"{where}: unknown field(s) {', '.join(extra)}")

    fields = {k: _check_str(obj, k, where) for k in _REQUIRED}
    if fields["split"] not in SPLITS:
        raise SchemaError(f"{where}: split must be one of {SPLITS}, got {fields['split']!r}")
    for key in ("document", "summary"):
        if not fields[key].strip():
            raise SchemaError(f"{where}: field {key!r} is empty")

    label = obj.get("label")
    rating = obj.get("rating")
    if label is None and rating is None:
        raise SchemaError(f"{where}: needs a 'label' or a 'rating'")
    if label is not None and rating is not None:
        raise SchemaError(f"{where}: has both 'label' and 'rating'")
    if label is not None and (isinstance(label, bool) or not isinstance(label, int) or label not in (0, 1)):
        raise SchemaError(f"{where}: label must be 0 or 1")
    if rating is not None:
        if isinstance(rating, bool) or not isinstance(rating, (int, float)) or not math.isfinite(rating):
            raise SchemaError(f"{where}: rating must be a finite number")
        rating = float(rating)

    system = obj.get("system")
    if system is not None and not isinstance(system, str):
        raise SchemaError(f"{where}: system must be a string")

    error_types = obj.get("error_types")
    if error_types is not None:
        if (
            not isinstance(error_types, list)
            or not error_types
            or not all(isinstance(t, str) and t in ERROR_TYPES for t in error_types)
        ):
            raise SchemaError(f"{where}: error_types must be a non-empty subset of {ERROR_TYPES}")
        error_types = tuple(t for t in ERROR_TYPES if t in error_types)

    return EvalExample(label=label, rating=rating, system=system, error_types=error_types, **fields)


def load_dataset(
    path: str | os.PathLike, mode: str | None = None
) -> tuple[list[EvalExample], DatasetManifest]:
    """Load and validate a canonical JSONL file.

    ``mode=None`` accepts either kind of file, inferred from the first line.
    """
    if mode not in (None, DETECTION, RATING):
        raise ValueError(f"unknown mode {mode!r}")
    path = Path(path)
    examples: list[EvalExample] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(f"{where}: invalid JSON ({exc.msg})") from exc
            ex = _parse_example(obj, where)
            kind = DETECTION if ex.label is not None else RATING
            if mode is None:
                mode = kind
            elif kind != mode:
                raise ModeMismatchError(f"{where}: {kind} example in a {mode} load")
            if ex.id in seen:
                raise SchemaError(f"{where}: duplicate id {ex.id!r}")
            seen.add(ex.id)
            examples.append(ex)
    counts = Counter(ex.split for ex in examples)
    manifest = DatasetManifest(
        name=path.stem,
        path=str(path),
        mode=mode or DETECTION,
        counts={s: counts.get(s, 0) for s in SPLITS},
    )
    return examples, manifest


def dump_dataset(examples, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_json(), ensure_ascii=False) + "\n")


def split_filter(examples, split: str) -> list[EvalExample]:
    return [ex for ex in examples if ex.split == split]
