"""Precision, recall and F1 over observed labels.

A prediction is positive when its probability is strictly greater than the
threshold. Pairs labelled 0 (unknown) are left out of every count.
Any 0/0 rate is reported as 0 and flagged.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .model import ModelConfig, predict


@dataclass(frozen=True)
class ConfusionCounts:
    tp: np.ndarray  # (C,) int
    fp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray

    @property
    def num_classes(self) -> int:
        return len(self.tp)


@dataclass(frozen=True)
class MetricsReport:
    class_names: tuple[str, ...]
    precision: np.ndarray  # (C,)
    recall: np.ndarray
    f1: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    counts: ConfusionCounts
    threshold: float
    degenerate: np.ndarray  # (C,) bool, some rate of the class was 0/0


def confusion_counts(probs, labels, threshold: float = 0.5) -> ConfusionCounts:
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.shape != labels.shape or probs.ndim != 2:
        raise ValueError(f"probs {probs.shape} and labels {labels.shape} must be equal (N, C)")
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    pred = probs > threshold
    pos = labels == 1
    neg = labels == -1
    return ConfusionCounts(
        tp=(pred & pos).sum(axis=0),
        fp=(pred & neg).sum(axis=0),
        fn=(~pred & pos).sum(axis=0),
        tn=(~pred & neg).sum(axis=0),
    )


def _ratio(num, den):
    return num / den if den > 0 else 0.0


def class_prf1(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be nonnegative")
    p = _ratio(tp, tp + fp)
    r = _ratio(tp, tp + fn)
    return p, r, _ratio(2.0 * p * r, p + r)


def aggregate(per_class, counts: ConfusionCounts):
    """(macro_P, macro_R, macro_F1, micro_F1) from per-class (P, R, F1) tuples."""
    per_class = np.asarray(per_class, dtype=np.float64).reshape(-1, 3)
    if len(per_class) == 0:
        raise ValueError("need at least one class")
    macro = per_class.mean(axis=0)
    _, _, micro_f1 = class_prf1(int(counts.tp.sum()), int(counts.fp.sum()), int(counts.fn.sum()))
    return float(macro[0]), float(macro[1]), float(macro[2]), micro_f1


def report_from_predictions(probs, labels, class_names=None,
                            threshold: float = 0.5) -> MetricsReport:
    counts = confusion_counts(probs, labels, threshold)
    C = counts.num_classes
    if class_names is None:
        class_names = tuple(str(c) for c in range(C))
    per_class = [class_prf1(int(counts.tp[c]), int(counts.fp[c]), int(counts.fn[c]))
                 for c in range(C)]
    macro_p, macro_r, macro_f1, micro_f1 = aggregate(per_class, counts)
    micro_p, micro_r, _ = class_prf1(int(counts.tp.sum()), int(counts.fp.sum()),
                                     int(counts.fn.sum()))
    arr = np.asarray(per_class, dtype=np.float64).reshape(C, 3)
    degenerate = ((counts.tp + counts.fp) == 0) | ((counts.tp + counts.fn) == 0)
    return MetricsReport(
        class_names=tuple(class_names),
        precision=arr[:, 0], recall=arr[:, 1], f1=arr[:, 2],
        macro_precision=macro_p, macro_recall=macro_r, macro_f1=macro_f1,
        micro_precision=micro_p, micro_recall=micro_r, micro_f1=micro_f1,
        counts=counts, threshold=threshold, degenerate=degenerate,
    )


def evaluate(params, dataset, threshold: float = 0.5, config=None,
             batch_size: int = 256) -> MetricsReport:
    """Eval-mode predictions of the model over ``dataset`` scored against its labels."""
    D, H, C = params.dims
    if dataset.feature_dim != D or dataset.num_classes != C:
        raise ValueError(
            f"dataset (D={dataset.feature_dim}, C={dataset.num_classes}) does not match "
            f"model (D={D}, C={C})")
    if config is None:
        config = ModelConfig(input_dim=D, hidden=H, num_classes=C)
    groups: dict[int, list[int]] = {}
    for i, ex in enumerate(dataset.examples):
        groups.setdefault(ex.timesteps, []).append(i)
    probs = np.zeros((len(dataset), C))
    for idx in groups.values():
        feats = np.stack([dataset.examples[i].features for i in idx])
        probs[idx] = predict(params, feats, config, batch_size)
    return report_from_predictions(probs, dataset.labels(), dataset.class_names, threshold)


def report_to_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "tp", "fp", "fn", "tn", "precision", "recall", "f1"])
    c = report.counts
    for k, name in enumerate(report.class_names):
        w.writerow([name, int(c.tp[k]), int(c.fp[k]), int(c.fn[k]), int(c.tn[k]),
                    f"{report.precision[k]:.6f}", f"{report.recall[k]:.6f}",
                    f"{report.f1[k]:.6f}"])
    totals = [int(c.tp.sum()), int(c.fp.sum()), int(c.fn.sum()), int(c.tn.sum())]
    w.writerow(["__macro__", *totals, f"{report.macro_precision:.6f}",
                f"{report.macro_recall:.6f}", f"{report.macro_f1:.6f}"])
    w.writerow(["__micro__", *totals, f"{report.micro_precision:.6f}",
                f"{report.micro_recall:.6f}", f"{report.micro_f1:.6f}"])
    return buf.getvalue()


def write_report_csv(report: MetricsReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(report_to_csv(report))
