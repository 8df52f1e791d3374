"""``fflm`` command line.

Subcommands::

    score           dataset -> per-example score rows (JSON lines)
    tune            score rows + validation labels -> weights/threshold JSON
    eval-detect     score rows + test labels + tuned JSON -> detection report
    eval-rate       score rows + ratings -> correlation report
    error-analysis  score rows + error-type tags -> per-type Spearman

Exit codes: 2 configuration error, 3 dataset/id error, 4 backend error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from fflm import __version__
from fflm.backend import CachedBackend, HttpBackend, ReplayStore, SyntheticBackend
from fflm.datasets import DETECTION, RATING, load_dataset, split_filter
from fflm.errors import (
    BackendError,
    BudgetExceededError,
    DatasetError,
    EmptyInputError,
    EvaluationError,
    InvalidWeightsError,
    StoreIOError,
)
from fflm.extraction import TRUNCATE_ERROR, TRUNCATE_TAIL, ExtractionConfig, build_pair_bundle
from fflm.harness import (
    decode_float,
    detection_report,
    encode_float,
    error_type_analysis,
    grid_search_weights,
    summary_level_report,
    system_level_report,
)
from fflm.metrics import RATING_WEIGHTS, AblationFlags, DeltaTriple, MetricWeights, fflm, score_pair

logger = logging.getLogger("fflm")

EXIT_CONFIG = 2
EXIT_DATASET = 3
EXIT_BACKEND = 4

METRIC_CHOICES = ("fflm", "cop", "harim", "avg_logprob", "d_y_prior", "d_x_prior", "d_y_cond")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    backend: str
    replay: str | None
    model_id: str
    extraction: ExtractionConfig
    weights: MetricWeights = RATING_WEIGHTS
    ablation: AblationFlags = field(default_factory=AblationFlags)
    parallelism: int = 1
    output: str | None = None

    def __post_init__(self):
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")

    def echo(self) -> dict:
        # parallelism and output path do not affect results; left out so
        # reruns with different values stay byte-identical
        return {
            "backend": self.backend,
            "replay": self.replay is not None,
            "model_id": self.model_id,
            "extraction": self.extraction.to_json(),
            "weights": self.weights.to_json(),
            "ablation": self.ablation.to_json(),
            "fflm_version": __version__,
        }


def make_backend(spec: str, replay: str | None):
    """Backend from ``http:<url>``, ``synthetic:<seed>`` or ``replay-only``."""
    if spec == "replay-only":
        if not replay:
            raise CliError("--backend replay-only needs --replay", EXIT_CONFIG)
        return CachedBackend(ReplayStore(replay, mode="r"))
    if spec.startswith("synthetic:"):
        try:
            inner = SyntheticBackend(int(spec.split(":", 1)[1]))
        except ValueError:
            raise CliError(f"bad synthetic seed in {spec!r}", EXIT_CONFIG) from None
    elif spec.startswith("http:") or spec.startswith("https:"):
        url = spec[len("http:"):] if spec.startswith("http:") and not spec.startswith("http://") else spec
        inner = HttpBackend(url)
    else:
        raise CliError(f"unknown backend spec {spec!r}", EXIT_CONFIG)
    if replay:
        return CachedBackend(ReplayStore(replay, mode="rw"), inner)
    return inner


def _load(path: str, mode: str | None = None):
    try:
        return load_dataset(path, mode)
    except (DatasetError, OSError) as exc:
        raise CliError(str(exc), EXIT_DATASET) from exc


def _write_text(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    tmp = Path(f"{output}.tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, output)


def _dump(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


# -- score ----------------------------------------------------------------------

def run_score(config: RunConfig, input_path: str, split: str | None = None, backend=None):
    """Score every example and write the rows; returns the backend used."""
    examples, _ = _load(input_path)
    if split:
        examples = split_filter(examples, split)
    if backend is None:
        try:
            backend = make_backend(config.backend, config.replay)
        except StoreIOError as exc:
            raise CliError(str(exc), EXIT_BACKEND) from exc
    echo = config.echo()
    echo["input"] = os.path.basename(input_path)
    echo["split"] = split

    def one(ex):
        bundle = build_pair_bundle(ex.document, ex.summary, config.extraction, backend, config.model_id)
        scores = score_pair(bundle, config.weights, config.ablation)
        row = {
            "id": ex.id,
            "scores": scores.to_json(),
            "meta": {
                "truncated": bundle.meta.truncated,
                "doc_tokens_original": bundle.meta.doc_tokens_original,
                "doc_tokens_retained": bundle.meta.doc_tokens_retained,
                "summary_tokens": len(bundle.p_y_s2s),
                "document_tokens_scored": len(bundle.p_x_s2s),
            },
            "config": echo,
        }
        return json.dumps(row, sort_keys=True, ensure_ascii=False)

    assert config.output is not None
    tmp = Path(f"{config.output}.tmp")
    try:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            lines = list(pool.map(one, examples))
        tmp.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        os.replace(tmp, config.output)
    except (BackendError, StoreIOError) as exc:
        tmp.unlink(missing_ok=True)
        raise CliError(f"backend error: {exc}", EXIT_BACKEND) from exc
    except (EmptyInputError, BudgetExceededError) as exc:
        tmp.unlink(missing_ok=True)
        raise CliError(str(exc), EXIT_DATASET) from exc
    logger.info("scored %d examples -> %s", len(examples), config.output)
    return backend


def _unescape(text: str) -> str:
    return text.replace("\\n", "\n").replace("\\t", "\t")


def _run_config_from_args(args) -> RunConfig:
    try:
        weights = MetricWeights.parse(args.weights) if args.weights else RATING_WEIGHTS
        extraction = ExtractionConfig(
            separator=_unescape(args.separator),
            prefix_joiner=_unescape(args.prefix_joiner),
            context_budget=args.context_budget,
            truncation_policy=args.truncation,
        )
        ablate = set(args.ablate or ())
        return RunConfig(
            backend=args.backend,
            replay=args.replay,
            model_id=args.model_id,
            extraction=extraction,
            weights=weights,
            ablation=AblationFlags(use_log="log" not in ablate, use_token_weights="weights" not in ablate),
            parallelism=args.parallelism,
            output=args.output,
        )
    except (ValueError, InvalidWeightsError) as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc


def cmd_score(args) -> None:
    run_score(_run_config_from_args(args), args.input, args.split)


# -- score-file consumers -------------------------------------------------------

def read_scores(path: str) -> tuple[dict[str, dict], dict]:
    """Score rows keyed by id, plus the config echo of the first row."""
    rows: dict[str, dict] = {}
    echo: dict = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    key = row["id"]
                    row["scores"]["deltas_weighted"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise CliError(f"{path}:{lineno}: malformed score row ({exc})", EXIT_DATASET) from exc
                if key in rows:
                    raise CliError(f"{path}:{lineno}: duplicate id {key!r}", EXIT_DATASET)
                rows[key] = row
                echo = echo or row.get("config", {})
    except OSError as exc:
        raise CliError(str(exc), EXIT_DATASET) from exc
    return rows, echo


def _align(rows: dict, examples, all_ids: set[str]) -> list[dict]:
    stray = sorted(set(rows) - all_ids)
    if stray:
        raise CliError(f"{len(stray)} scored id(s) not in dataset, e.g. {stray[0]!r}", EXIT_DATASET)
    missing = [ex.id for ex in examples if ex.id not in rows]
    if missing:
        raise CliError(f"{len(missing)} dataset id(s) have no scores, e.g. {missing[0]!r}", EXIT_DATASET)
    return [rows[ex.id] for ex in examples]


def _metric_values(rows, metric: str, weights: MetricWeights | None = None) -> list[float]:
    values = []
    for row in rows:
        sc = row["scores"]
        if metric == "fflm" and weights is not None:
            values.append(fflm(DeltaTriple.from_json(sc["deltas_weighted"]), weights))
        elif metric in ("d_y_prior", "d_x_prior", "d_y_cond"):
            values.append(float(sc["deltas_weighted"][metric]))
        else:
            values.append(float(sc[metric]))
    return values


def cmd_tune(args) -> None:
    rows, echo = read_scores(args.scores)
    examples, _ = _load(args.input, DETECTION)
    val = split_filter(examples, args.split)
    aligned = _align(rows, val, {ex.id for ex in examples})
    deltas = [DeltaTriple.from_json(r["scores"]["deltas_weighted"]) for r in aligned]
    try:
        result = grid_search_weights(deltas, [ex.label for ex in val], step=args.step)
    except (EvaluationError, ValueError) as exc:
        raise CliError(str(exc), EXIT_DATASET) from exc
    out = {
        "weights": result.weights.to_json(),
        "threshold": encode_float(result.threshold),
        "validation_ba": result.balanced_accuracy,
        "n_combos": result.n_combos,
        "step": args.step,
        "split": args.split,
        "n": len(val),
        "delta_form": deltas[0].form if deltas else None,
        "config": echo,
    }
    _write_text(_dump(out), args.output)


def cmd_eval_detect(args) -> None:
    rows, echo = read_scores(args.scores)
    examples, _ = _load(args.input, DETECTION)
    test = split_filter(examples, args.split)
    aligned = _align(rows, test, {ex.id for ex in examples})
    try:
        with open(args.tuned, encoding="utf-8") as fh:
            tuned = json.load(fh)
        weights = MetricWeights(**tuned["weights"])
        threshold = decode_float(tuned["threshold"])
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise CliError(f"bad tuned file {args.tuned}: {exc}", EXIT_CONFIG) from exc
    scores = _metric_values(aligned, "fflm", weights)
    try:
        report = detection_report(scores, [ex.label for ex in test], threshold, weights)
    except EvaluationError as exc:
        raise CliError(str(exc), EXIT_DATASET) from exc
    out = report.to_json()
    out.update({"split": args.split, "config": echo})
    _write_text(_dump(out), args.output)


def cmd_eval_rate(args) -> None:
    rows, echo = read_scores(args.scores)
    examples, _ = _load(args.input, RATING)
    if args.split:
        examples = split_filter(examples, args.split)
    all_ids = {ex.id for ex in examples} | (set(rows) if args.split else set())
    aligned = _align(rows, examples, all_ids)
    weights = MetricWeights.parse(args.weights) if args.weights else None
    scores = _metric_values(aligned, args.metric, weights)
    ratings = [ex.rating for ex in examples]
    try:
        if args.level == "system":
            report = system_level_report(scores, ratings, [ex.system for ex in examples])
        else:
            report = summary_level_report(scores, ratings)
    except EvaluationError as exc:
        raise CliError(str(exc), EXIT_DATASET) from exc
    out = report.to_json()
    out.update({"metric": args.metric, "config": echo})
    if weights is not None:
        out["weights"] = weights.to_json()
    _write_text(_dump(out), args.output)


def cmd_error_analysis(args) -> None:
    rows, echo = read_scores(args.scores)
    examples, _ = _load(args.input)
    if args.split:
        examples = split_filter(examples, args.split)
    all_ids = {ex.id for ex in examples} | (set(rows) if args.split else set())
    aligned = _align(rows, examples, all_ids)
    weights = MetricWeights.parse(args.weights) if args.weights else None
    scores = _metric_values(aligned, args.metric, weights)
    try:
        results = error_type_analysis(
            examples, scores, n_per_type=args.n_per_type, repeats=args.repeats, seed=args.seed
        )
    except EvaluationError as exc:
        raise CliError(str(exc), EXIT_DATASET) from exc
    out = {
        "metric": args.metric,
        "seed": args.seed,
        "n_per_type": args.n_per_type,
        "repeats": args.repeats,
        "target": "spearman(score, 1 for untagged examples / 0 for sampled error examples)",
        "types": {k: v.to_json() for k, v in results.items()},
        "config": echo,
    }
    _write_text(_dump(out), args.output)


# -- argument parsing -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fflm", description="Summary faithfulness scoring from LM probability changes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score document/summary pairs")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--backend", required=True, help="http:<url> | synthetic:<seed> | replay-only")
    p.add_argument("--replay", help="JSON-lines replay store")
    p.add_argument("--model-id", default="")
    p.add_argument("--separator", default="\\nTL;DR\\n", help="backslash escapes allowed")
    p.add_argument("--prefix-joiner", default="\\n")
    p.add_argument("--context-budget", type=int, default=2048)
    p.add_argument("--truncation", choices=(TRUNCATE_TAIL, TRUNCATE_ERROR), default=TRUNCATE_TAIL)
    p.add_argument("--weights", help="alpha,beta,delta (default 0.25,0.25,0.5)")
    p.add_argument("--ablate", action="append", choices=("log", "weights"))
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--split", choices=("val", "test"))
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("tune", help="grid-search weights and threshold on validation data")
    p.add_argument("--scores", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--split", default="val", choices=("val", "test"))
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--output")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("eval-detect", help="balanced accuracy on test data")
    p.add_argument("--scores", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--tuned", required=True)
    p.add_argument("--split", default="test", choices=("val", "test"))
    p.add_argument("--output")
    p.set_defaults(func=cmd_eval_detect)

    p = sub.add_parser("eval-rate", help="correlation with human ratings")
    p.add_argument("--scores", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--level", choices=("summary", "system"), default="summary")
    p.add_argument("--metric", choices=METRIC_CHOICES, default="fflm")
    p.add_argument("--weights", help="recombine fflm from stored deltas")
    p.add_argument("--split", choices=("val", "test"))
    p.add_argument("--output")
    p.set_defaults(func=cmd_eval_rate)

    p = sub.add_parser("error-analysis", help="per-error-type Spearman on subsamples")
    p.add_argument("--scores", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--metric", choices=METRIC_CHOICES, default="fflm")
    p.add_argument("--weights")
    p.add_argument("--n-per-type", type=int, default=50)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", choices=("val", "test"))
    p.add_argument("--output")
    p.set_defaults(func=cmd_error_analysis)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        args.func(args)
    except CliError as exc:
        logger.error("%s", exc)
        return exc.code
    except InvalidWeightsError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
