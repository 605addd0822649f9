"""Confusion matrices and the standard multi-class metric suite.

Orientation is frozen as rows = true class, columns = predicted class and
is stamped on every artifact this module writes. Per-class scores come
from one-vs-rest counts:

    accuracy  = (TP + TN) / (TP + TN + FP + FN)
    precision = TP / (TP + FP)
    recall    = TP / (TP + FN)
    f1        = 2 * precision * recall / (precision + recall)

Degenerate denominators yield 0.0 plus an explicit flag instead of NaN.
Macro aggregates are unweighted class means; micro aggregates pool counts
(for single-label data micro precision == micro recall == overall top-1).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

ORIENTATION = "rows=true,cols=predicted"


@dataclass
class ConfusionMatrix:
    counts: np.ndarray          # C x C int64
    labels: list

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class ClassMetrics:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    accuracy: float
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
            "precision": self.precision, "recall": self.recall,
            "f1": self.f1, "accuracy": self.accuracy, "flags": list(self.flags),
        }


@dataclass
class MetricsReport:
    labels: list
    per_class: dict
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    top1: float
    total: int

    def to_dict(self) -> dict:
        return {
            "orientation": ORIENTATION,
            "labels": list(self.labels),
            "total": self.total,
            "overall_top1": self.top1,
            "macro": {"precision": self.macro_precision, "recall": self.macro_recall,
                      "f1": self.macro_f1},
            "micro": {"precision": self.micro_precision, "recall": self.micro_recall,
                      "f1": self.micro_f1},
            "per_class": {lbl: self.per_class[lbl].to_dict() for lbl in self.labels},
        }

    @staticmethod
    def from_dict(d: dict) -> "MetricsReport":
        per_class = {lbl: ClassMetrics(**vals) for lbl, vals in d["per_class"].items()}
        return MetricsReport(
            labels=list(d["labels"]), per_class=per_class,
            macro_precision=d["macro"]["precision"], macro_recall=d["macro"]["recall"],
            macro_f1=d["macro"]["f1"],
            micro_precision=d["micro"]["precision"], micro_recall=d["micro"]["recall"],
            micro_f1=d["micro"]["f1"],
            top1=d["overall_top1"], total=d["total"],
        )


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both vanish."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def confusion_matrix(true_labels, predicted_labels, num_classes: int,
                     labels=None) -> ConfusionMatrix:
    """Tally counts[true][pred] over paired label sequences."""
    t = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(predicted_labels, dtype=np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise ShapeError(
            f"label sequences must be equal-length 1-d, got {t.shape} and {p.shape}"
        )
    for name, arr in (("true", t), ("predicted", p)):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise ShapeError(f"{name} labels fall outside [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    if labels is None:
        labels = [str(i) for i in range(num_classes)]
    return ConfusionMatrix(counts, list(labels))


def per_class_metrics(cm: ConfusionMatrix) -> MetricsReport:
    """One-vs-rest metrics per class plus macro/micro aggregates."""
    counts = cm.counts
    total = int(counts.sum())
    if total == 0:
        raise ShapeError("confusion matrix is empty")
    per_class = {}
    tps = fps = fns = 0
    for i, label in enumerate(cm.labels):
        tp = int(counts[i, i])
        fp = int(counts[:, i].sum() - tp)
        fn = int(counts[i, :].sum() - tp)
        tn = total - tp - fp - fn
        flags = []
        if tp + fp == 0:
            precision = 0.0
            flags.append("precision_undefined")
        else:
            precision = tp / (tp + fp)
        if tp + fn == 0:
            recall = 0.0
            flags.append("recall_undefined")
        else:
            recall = tp / (tp + fn)
        per_class[label] = ClassMetrics(
            tp=tp, fp=fp, fn=fn, tn=tn,
            precision=precision, recall=recall,
            f1=f1_score(precision, recall),
            accuracy=(tp + tn) / total,
            flags=flags,
        )
        tps += tp
        fps += fp
        fns += fn
    vals = list(per_class.values())
    micro_p = tps / (tps + fps) if tps + fps else 0.0
    micro_r = tps / (tps + fns) if tps + fns else 0.0
    return MetricsReport(
        labels=list(cm.labels),
        per_class=per_class,
        macro_precision=float(np.mean([v.precision for v in vals])),
        macro_recall=float(np.mean([v.recall for v in vals])),
        macro_f1=float(np.mean([v.f1 for v in vals])),
        micro_precision=micro_p,
        micro_recall=micro_r,
        micro_f1=f1_score(micro_p, micro_r),
        top1=float(np.trace(counts) / total),
        total=total,
    )


def normalize_rows(cm: ConfusionMatrix):
    """Row-normalized matrix (float64) plus the indices of all-zero rows."""
    counts = np.asarray(cm.counts, dtype=np.float64)
    sums = counts.sum(axis=1, keepdims=True)
    zero_rows = [i for i in range(counts.shape[0]) if sums[i, 0] == 0]
    safe = np.where(sums == 0, 1.0, sums)
    out = counts / safe
    return out, zero_rows


def write_report(report: MetricsReport, cm: ConfusionMatrix, path_prefix) -> dict:
    """Emit metrics.json, raw/normalized confusion CSVs and a heatmap PNG.

    Returns {kind: path}. JSON and CSV bytes are deterministic for a given
    report, which the rerun-idempotency contract relies on.
    """
    from pathlib import Path

    from .render import heatmap_png

    prefix = Path(path_prefix)
    prefix.mkdir(parents=True, exist_ok=True)
    paths = {
        "metrics": prefix / "metrics.json",
        "confusion": prefix / "confusion.csv",
        "confusion_normalized": prefix / "confusion_normalized.csv",
        "heatmap": prefix / "confusion.png",
    }
    with open(paths["metrics"], "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    _write_matrix_csv(paths["confusion"], cm.labels, cm.counts, fmt=str)
    norm, _ = normalize_rows(cm)
    _write_matrix_csv(paths["confusion_normalized"], cm.labels, norm, fmt=lambda v: repr(float(v)))
    heatmap_png(norm, paths["heatmap"])
    return paths


def read_report(path) -> MetricsReport:
    with open(path, encoding="utf-8") as f:
        return MetricsReport.from_dict(json.load(f))


def _write_matrix_csv(path, labels, matrix, fmt):
    import csv

    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([r"true\predicted"] + list(labels))
        for label, row in zip(labels, matrix):
            writer.writerow([label] + [fmt(v) for v in row])
