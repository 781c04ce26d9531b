"""Precision/Recall/F1 for the causal class, with cross-fold aggregation.

Zero-denominator cases are defined as 0 and flagged instead of undefined,
so degenerate few-shot runs still aggregate. The fold aggregate reports the
arithmetic mean of each metric and the population standard deviation of the
per-fold F1 scores (a sample-std switch exists); a pooled-counts mode is
available as an alternative to the default mean-of-ratios.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass
from pathlib import Path

from .backend import PredictionRecord
from .dataset import CAUSAL, LABELS
from .errors import (
    DuplicatePredictionError,
    MissingGoldError,
    ParseError,
    SchemaError,
)

NO_POSITIVE_PREDICTIONS = "no_positive_predictions"
NO_POSITIVE_GOLDS = "no_positive_golds"


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
            tn=self.tn + other.tn,
        )


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    degenerate_flags: frozenset[str] = frozenset()

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "degenerate_flags": sorted(self.degenerate_flags),
        }


@dataclass(frozen=True)
class FoldReport:
    per_fold: tuple[Metrics, ...]
    mean: Metrics
    f1_std: float

    def to_dict(self) -> dict:
        return {
            "per_fold": [m.to_dict() for m in self.per_fold],
            "mean": self.mean.to_dict(),
            "f1_std": self.f1_std,
        }


def confusion_from_predictions(
    preds: list[PredictionRecord], golds: dict[str, str]
) -> Confusion:
    seen: set[str] = set()
    tp = fp = fn = tn = 0
    for pred in preds:
        if pred.instance_id in seen:
            raise DuplicatePredictionError(f"duplicate prediction for {pred.instance_id!r}")
        seen.add(pred.instance_id)
        if pred.instance_id not in golds:
            raise MissingGoldError(f"no gold label for {pred.instance_id!r}")
        gold_positive = golds[pred.instance_id] == CAUSAL
        pred_positive = pred.predicted == CAUSAL
        if pred_positive and gold_positive:
            tp += 1
        elif pred_positive:
            fp += 1
        elif gold_positive:
            fn += 1
        else:
            tn += 1
    return Confusion(tp=tp, fp=fp, fn=fn, tn=tn)


def metrics_from_confusion(c: Confusion) -> Metrics:
    flags = set()
    if c.tp + c.fp == 0:
        flags.add(NO_POSITIVE_PREDICTIONS)
    if c.tp + c.fn == 0:
        flags.add(NO_POSITIVE_GOLDS)
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(precision=precision, recall=recall, f1=f1, degenerate_flags=frozenset(flags))


def compute_metrics(preds: list[PredictionRecord], golds: dict[str, str]) -> Metrics:
    """P/R/F1 with causal as the positive class."""
    return metrics_from_confusion(confusion_from_predictions(preds, golds))


def aggregate_folds(reports: list[Metrics], population_std: bool = True) -> FoldReport:
    """Arithmetic means across folds plus the standard deviation of F1.

    The default is the population standard deviation; set
    ``population_std=False`` for the sample (n-1) variant. A single fold
    yields std 0 either way.
    """
    if not reports:
        raise ValueError("aggregate_folds needs at least one fold")
    mean = Metrics(
        precision=statistics.fmean(m.precision for m in reports),
        recall=statistics.fmean(m.recall for m in reports),
        f1=statistics.fmean(m.f1 for m in reports),
        degenerate_flags=frozenset().union(*(m.degenerate_flags for m in reports)),
    )
    f1_scores = [m.f1 for m in reports]
    if len(f1_scores) == 1:
        f1_std = 0.0
    elif population_std:
        f1_std = statistics.pstdev(f1_scores)
    else:
        f1_std = statistics.stdev(f1_scores)
    return FoldReport(per_fold=tuple(reports), mean=mean, f1_std=f1_std)


def pooled_metrics(confusions: list[Confusion]) -> Metrics:
    """Ratio-of-pooled-counts alternative to the fold-mean aggregate."""
    if not confusions:
        raise ValueError("pooled_metrics needs at least one confusion")
    total = Confusion()
    for c in confusions:
        total = total + c
    return metrics_from_confusion(total)


def read_predictions_jsonl(path: str | Path) -> list[PredictionRecord]:
    records: list[PredictionRecord] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            for fname in ("instance_id", "predicted", "backend"):
                if fname not in data:
                    raise SchemaError(f"missing field {fname!r}", line=lineno)
            if data["predicted"] not in LABELS:
                raise SchemaError(f"unknown label {data['predicted']!r}", line=lineno)
            records.append(
                PredictionRecord(
                    instance_id=data["instance_id"],
                    predicted=data["predicted"],
                    score=data.get("score"),
                    backend=data["backend"],
                )
            )
    return records


def format_report(report: FoldReport) -> str:
    """Aligned plain-text P/R/F1 table, one row per fold plus the mean."""
    lines = [f"{'fold':>6}  {'P':>8}  {'R':>8}  {'F1':>8}"]
    for i, m in enumerate(report.per_fold):
        lines.append(f"{i:>6}  {m.precision:>8.4f}  {m.recall:>8.4f}  {m.f1:>8.4f}")
    m = report.mean
    lines.append(f"{'mean':>6}  {m.precision:>8.4f}  {m.recall:>8.4f}  {m.f1:>8.4f}")
    lines.append(f"f1_std  {report.f1_std:.4f}")
    return "\n".join(lines) + "\n"
