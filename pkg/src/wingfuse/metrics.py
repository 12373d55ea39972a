"""Species-level evaluation for imbalanced label sets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyEvaluation, LengthMismatch
from .taxonomy import TaxonLabel


def _name(label) -> str:
    if isinstance(label, TaxonLabel):
        return label.at(label.rank)
    return str(label)


@dataclass
class EvalReport:
    labels: list[str]
    accuracy: float
    precision: dict[str, float]
    recall: dict[str, float]
    f1: dict[str, float]
    macro_f1: float
    confusion: np.ndarray  # rows: truth, columns: prediction
    support: dict[str, int]
    undefined: list[str] = field(default_factory=list)

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "n_events": self.total,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class": {
                name: {
                    "precision": self.precision[name],
                    "recall": self.recall[name],
                    "f1": self.f1[name],
                    "support": self.support[name],
                }
                for name in self.labels
            },
            "confusion_matrix": self.confusion.tolist(),
            "undefined": list(self.undefined),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        labels = d["labels"]
        pc = d["per_class"]
        return cls(
            labels,
            d["accuracy"],
            {k: pc[k]["precision"] for k in labels},
            {k: pc[k]["recall"] for k in labels},
            {k: pc[k]["f1"] for k in labels},
            d["macro_f1"],
            np.asarray(d["confusion_matrix"], dtype=np.int64),
            {k: pc[k]["support"] for k in labels},
            list(d.get("undefined", [])),
        )


def evaluate(predictions: Sequence, truths: Sequence, labels: Sequence[str] | None = None) -> EvalReport:
    """Accuracy, per-class precision/recall/F1, macro-F1 and confusion matrix.

    ``labels`` fixes the class order; by default it is the order of first
    appearance among truths, then predictions. Precision or recall with a
    zero denominator is reported as 0 and the class is listed in
    ``undefined``. Macro-F1 averages over every listed class.
    """
    if len(predictions) != len(truths):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(truths)} truths")
    if len(truths) == 0:
        raise EmptyEvaluation("nothing to evaluate")
    pred = [_name(p) for p in predictions]
    true = [_name(t) for t in truths]
    if labels is None:
        labels = list(dict.fromkeys(true + pred))
    else:
        labels = list(labels)
        labels += [x for x in dict.fromkeys(true + pred) if x not in labels]
    index = {name: i for i, name in enumerate(labels)}
    k = len(labels)
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, ([index[t] for t in true], [index[p] for p in pred]), 1)

    tp = np.diag(cm).astype(np.float64)
    col = cm.sum(axis=0).astype(np.float64)
    row = cm.sum(axis=1).astype(np.float64)
    undefined = [labels[i] for i in range(k) if col[i] == 0 or row[i] == 0]
    precision = np.divide(tp, col, out=np.zeros(k), where=col > 0)
    recall = np.divide(tp, row, out=np.zeros(k), where=row > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros(k), where=denom > 0)
    return EvalReport(
        labels=labels,
        accuracy=float(tp.sum() / cm.sum()),
        precision=dict(zip(labels, precision.tolist())),
        recall=dict(zip(labels, recall.tolist())),
        f1=dict(zip(labels, f1.tolist())),
        macro_f1=float(f1.mean()),
        confusion=cm,
        support=dict(zip(labels, row.astype(int).tolist())),
        undefined=undefined,
    )
