"""Token-classification impact analysis over CoNLL-format data.

Measures how much additional segmentation each label class suffers and how
word fragmentation correlates with labeling errors.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import normalize_text
from .segmenter import SubwordModel, fragmentation

logger = logging.getLogger(__name__)

NE_CLASS = "NE"
NOT_NE_CLASS = "NotNE"


class ConllFormatError(ValueError):
    """A CoNLL input file or prediction file cannot be used."""


@dataclass
class LabeledSentence:
    """Aligned token/label rows of one sentence; predictions optional."""

    tokens: list[str]
    gold: list[str]
    pred: list[str] | None = None

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.gold):
            raise ConllFormatError(
                f"{len(self.tokens)} tokens but {len(self.gold)} labels"
            )
        if self.pred is not None and len(self.pred) != len(self.tokens):
            raise ConllFormatError(
                f"{len(self.tokens)} tokens but {len(self.pred)} predicted labels"
            )


def parse_conll(
    path: str | Path, token_column: int = 0, label_column: int = -1
) -> list[LabeledSentence]:
    """Read whitespace-separated columns; blank lines separate sentences.

    Lines starting with -DOCSTART- are skipped. Column indexes may be
    negative (Python-style); out-of-range columns raise with the line number.
    """
    path = Path(path)
    sentences: list[LabeledSentence] = []
    tokens: list[str] = []
    labels: list[str] = []

    def flush() -> None:
        if tokens:
            sentences.append(LabeledSentence(list(tokens), list(labels)))
            tokens.clear()
            labels.clear()

    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                flush()
                continue
            if line.startswith("-DOCSTART-"):
                continue
            columns = line.split()
            for name, index in (("token", token_column), ("label", label_column)):
                if not -len(columns) <= index < len(columns):
                    raise ConllFormatError(
                        f"{path}:{lineno}: missing {name} column {index} "
                        f"(line has {len(columns)} columns)"
                    )
            tokens.append(columns[token_column])
            labels.append(columns[label_column])
    flush()
    return sentences


def with_predictions(
    gold: Sequence[LabeledSentence], predictions: Sequence[LabeledSentence]
) -> list[LabeledSentence]:
    """Zip a parallel predictions file onto gold sentences.

    The prediction file's label rows (its `gold` field) become `pred`.
    Any shape mismatch raises naming the first misaligned sentence (1-based).
    """
    if len(gold) != len(predictions):
        index = min(len(gold), len(predictions)) + 1
        raise ConllFormatError(
            f"alignment error at sentence {index}: gold has {len(gold)} sentences, "
            f"predictions have {len(predictions)}"
        )
    merged: list[LabeledSentence] = []
    for index, (g, p) in enumerate(zip(gold, predictions), start=1):
        if len(g.tokens) != len(p.tokens):
            raise ConllFormatError(
                f"alignment error at sentence {index}: {len(g.tokens)} tokens "
                f"vs {len(p.tokens)} predicted"
            )
        merged.append(LabeledSentence(g.tokens, g.gold, list(p.gold)))
    return merged


def is_entity_token(label: str) -> bool:
    return label != "O"


def _word_form(token: str, model: SubwordModel) -> str:
    return model.marker + normalize_text(token, model.normalization)


@dataclass
class SegmentationStats:
    """Token and piece counts per label class, with additional-segmentation rates.

    rate = 100 x (pieces - tokens) / tokens; a class with no tokens is
    omitted (and logged) rather than reported with an undefined rate.
    """

    class_counts: dict[str, tuple[int, int]]
    rate: dict[str, float]


def segmentation_stats(
    sentences: Sequence[LabeledSentence], model: SubwordModel
) -> SegmentationStats:
    """Fragment every token as a word-initial word and aggregate by gold class."""
    if not sentences:
        raise ValueError("no sentences to analyze")
    counts = {NE_CLASS: [0, 0], NOT_NE_CLASS: [0, 0]}
    frag_cache: dict[str, int] = {}
    for sentence in sentences:
        for token, label in zip(sentence.tokens, sentence.gold):
            pieces = frag_cache.get(token)
            if pieces is None:
                pieces = fragmentation(_word_form(token, model), model)
                frag_cache[token] = pieces
            bucket = counts[NE_CLASS if is_entity_token(label) else NOT_NE_CLASS]
            bucket[0] += 1
            bucket[1] += pieces
    class_counts: dict[str, tuple[int, int]] = {}
    rate: dict[str, float] = {}
    for cls, (token_count, piece_count) in counts.items():
        if token_count == 0:
            logger.warning("class %s has no tokens; omitted from stats", cls)
            continue
        class_counts[cls] = (token_count, piece_count)
        rate[cls] = 100.0 * (piece_count - token_count) / token_count
    return SegmentationStats(class_counts, rate)


def entity_spans(labels: Sequence[str]) -> list[tuple[int, int]]:
    """Maximal entity spans [start, end) from gold labels.

    Any non-O label is in-span; a B- prefix or a type change starts a new
    span, and an I- with no open span starts one (malformed inputs are
    tolerated, not rejected).
    """
    spans: list[tuple[int, int]] = []
    start: int | None = None
    current_type: str | None = None
    for index, label in enumerate(labels):
        if label == "O":
            if start is not None:
                spans.append((start, index))
                start = None
            continue
        label_type = label.split("-", 1)[1] if "-" in label else label
        if start is None or label.startswith("B-") or label_type != current_type:
            if start is not None:
                spans.append((start, index))
            start = index
        current_type = label_type
    if start is not None:
        spans.append((start, len(labels)))
    return spans


@dataclass
class CorrelationReport:
    """Pearson correlation between fragmentation and label non-detection.

    `pearson_r` is None when either variable has zero variance (undefined,
    never coerced to 0).
    """

    unit: str
    n: int
    pearson_r: float | None
    mean_fragmentation: float
    error_rate: float


def _pearson(xs: Sequence[float], ys: Sequence[float]) -> tuple[float | None, float, float]:
    n = len(xs)
    mean_x = math.fsum(xs) / n
    mean_y = math.fsum(ys) / n
    # min == max is the float-exact zero-variance test; a rounded mean can
    # make the summed squares spuriously positive for constant input
    if min(xs) == max(xs) or min(ys) == max(ys):
        return None, mean_x, mean_y
    var_x = math.fsum((x - mean_x) ** 2 for x in xs) / n
    var_y = math.fsum((y - mean_y) ** 2 for y in ys) / n
    if var_x == 0.0 or var_y == 0.0:
        return None, mean_x, mean_y
    cov = math.fsum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys)) / n
    r = cov / (math.sqrt(var_x) * math.sqrt(var_y))
    return max(-1.0, min(1.0, r)), mean_x, mean_y


def fragmentation_error_correlation(
    sentences: Sequence[LabeledSentence],
    model: SubwordModel,
    unit: str = "token",
) -> CorrelationReport:
    """Correlate fragmentation with prediction mismatches.

    unit="token": x is the token's piece count, y is 1 when the predicted
    label differs from gold. unit="entity": per maximal gold span, x is
    pieces per span token and y is 1 when any token in the span mismatches.
    Covariance and variances use population (1/n) normalization.
    """
    if unit not in ("token", "entity"):
        raise ValueError(f"unknown unit {unit!r}")
    xs: list[float] = []
    ys: list[float] = []
    frag_cache: dict[str, int] = {}

    def frag(token: str) -> int:
        pieces = frag_cache.get(token)
        if pieces is None:
            pieces = fragmentation(_word_form(token, model), model)
            frag_cache[token] = pieces
        return pieces

    for sentence in sentences:
        if sentence.pred is None:
            raise ValueError("predictions are required for correlation analysis")
        if unit == "token":
            for token, gold, pred in zip(sentence.tokens, sentence.gold, sentence.pred):
                xs.append(float(frag(token)))
                ys.append(0.0 if pred == gold else 1.0)
        else:
            for start, end in entity_spans(sentence.gold):
                span_pieces = sum(frag(t) for t in sentence.tokens[start:end])
                xs.append(span_pieces / (end - start))
                mismatch = any(
                    sentence.pred[i] != sentence.gold[i] for i in range(start, end)
                )
                ys.append(1.0 if mismatch else 0.0)

    if len(xs) < 2:
        raise ValueError(f"need at least 2 {unit} samples, got {len(xs)}")
    r, mean_x, mean_y = _pearson(xs, ys)
    return CorrelationReport(
        unit=unit,
        n=len(xs),
        pearson_r=r,
        mean_fragmentation=mean_x,
        error_rate=mean_y,
    )


def build_report(
    stats: SegmentationStats,
    correlation: CorrelationReport | None = None,
    model_info: Mapping[str, object] | None = None,
) -> dict:
    """Assemble the JSON-serializable impact report for one model."""
    report: dict = {
        "model": dict(model_info or {}),
        "segmentation": {
            cls: {
                "tokens": token_count,
                "pieces": piece_count,
                "rate_pct": stats.rate[cls],
            }
            for cls, (token_count, piece_count) in stats.class_counts.items()
        },
    }
    if correlation is not None:
        report["correlation"] = {
            "unit": correlation.unit,
            "n": correlation.n,
            "pearson_r": "undefined" if correlation.pearson_r is None else correlation.pearson_r,
            "mean_fragmentation": correlation.mean_fragmentation,
            "error_rate": correlation.error_rate,
        }
    return report


def canonical_json(payload: object) -> str:
    """Stable rendering: sorted keys, two-space indent, repr floats."""
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2)


def emit_report(
    stats: SegmentationStats,
    correlation: CorrelationReport | None = None,
    model_info: Mapping[str, object] | None = None,
) -> str:
    """Render one impact report as canonical JSON."""
    return canonical_json(build_report(stats, correlation, model_info))
