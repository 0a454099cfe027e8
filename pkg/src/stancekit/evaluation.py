"""Confusion-matrix accounting and micro/macro precision, recall, F1.

Per-class precision and recall are combined into F1 as the harmonic
mean.  Micro averaging pools true/false positive counts over classes
before forming the ratio, which for single-label multiclass equals
accuracy; macro averaging means the per-class precisions and recalls
first and takes the harmonic mean of those two means (not the mean of
per-class F1 scores).  Any 0/0 ratio is defined as 0 and flagged.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from stancekit.stances import STANCE_ORDER

N_CLASSES = len(STANCE_ORDER)
_INDEX = {s: i for i, s in enumerate(STANCE_ORDER)}


def _safe_ratio(num: float, den: float, flags: list, name: str) -> float:
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def f1_score(precision: float, recall: float, flags: list, name: str) -> float:
    return _safe_ratio(2.0 * precision * recall, precision + recall, flags, name)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray = field(default_factory=lambda: np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64))

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (N_CLASSES, N_CLASSES) or np.any(counts < 0):
            raise ValueError("confusion matrix must be 3x3 with non-negative counts")
        self.counts = counts

    @classmethod
    def from_pairs(cls, truths, predictions) -> "ConfusionMatrix":
        if len(truths) != len(predictions):
            raise ValueError("truths and predictions must have equal lengths")
        if len(truths) == 0:
            raise ValueError("cannot score an empty prediction list")
        counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
        for t, p in zip(truths, predictions):
            counts[_INDEX[t], _INDEX[p]] += 1
        return cls(counts)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def tp(self, k: int) -> int:
        return int(self.counts[k, k])

    def fp(self, k: int) -> int:
        return int(self.counts[:, k].sum() - self.counts[k, k])

    def fn(self, k: int) -> int:
        return int(self.counts[k, :].sum() - self.counts[k, k])


@dataclass
class ClassScores:
    precision: float
    recall: float
    f1: float


@dataclass
class EvaluationReport:
    confusion: ConfusionMatrix
    per_class: dict
    micro: ClassScores
    macro: ClassScores
    deviations: dict
    zero_division_flags: list

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion.counts.tolist(),
            "per_class": {
                s.value: vars(scores) for s, scores in self.per_class.items()
            },
            "micro": vars(self.micro),
            "macro": vars(self.macro),
            "deviations": {
                s.value: {o.value: pct for o, pct in row.items()}
                for s, row in self.deviations.items()
            },
            "zero_division_flags": self.zero_division_flags,
        }

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def csv_rows(self) -> list:
        """One row per class plus micro/macro rows, deviation columns included."""
        rows = []
        for s in STANCE_ORDER:
            dev = self.deviations[s]
            rows.append(
                {
                    "class": s.value,
                    "precision": self.per_class[s].precision,
                    "recall": self.per_class[s].recall,
                    "f1": self.per_class[s].f1,
                    **{
                        f"dev_{o.value}": ("" if o == s else dev[o])
                        for o in STANCE_ORDER
                    },
                }
            )
        for name, scores in (("micro", self.micro), ("macro", self.macro)):
            rows.append(
                {
                    "class": name,
                    "precision": scores.precision,
                    "recall": scores.recall,
                    "f1": scores.f1,
                    **{f"dev_{o.value}": "" for o in STANCE_ORDER},
                }
            )
        return rows

    def write_csv(self, path) -> None:
        rows = self.csv_rows()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)


def report_from_confusion(matrix: ConfusionMatrix) -> EvaluationReport:
    flags: list = []
    per_class = {}
    for s in STANCE_ORDER:
        k = _INDEX[s]
        p = _safe_ratio(matrix.tp(k), matrix.tp(k) + matrix.fp(k), flags, f"precision_{s.value}")
        r = _safe_ratio(matrix.tp(k), matrix.tp(k) + matrix.fn(k), flags, f"recall_{s.value}")
        per_class[s] = ClassScores(p, r, f1_score(p, r, flags, f"f1_{s.value}"))

    tp_sum = sum(matrix.tp(k) for k in range(N_CLASSES))
    fp_sum = sum(matrix.fp(k) for k in range(N_CLASSES))
    fn_sum = sum(matrix.fn(k) for k in range(N_CLASSES))
    micro_p = _safe_ratio(tp_sum, tp_sum + fp_sum, flags, "precision_micro")
    micro_r = _safe_ratio(tp_sum, tp_sum + fn_sum, flags, "recall_micro")
    micro = ClassScores(micro_p, micro_r, f1_score(micro_p, micro_r, flags, "f1_micro"))

    macro_p = sum(per_class[s].precision for s in STANCE_ORDER) / N_CLASSES
    macro_r = sum(per_class[s].recall for s in STANCE_ORDER) / N_CLASSES
    macro = ClassScores(macro_p, macro_r, f1_score(macro_p, macro_r, flags, "f1_macro"))

    deviations = {}
    for s in STANCE_ORDER:
        k = _INDEX[s]
        row_total = matrix.counts[k, :].sum()
        deviations[s] = {
            o: (
                0.0
                if (o == s or row_total == 0)
                else 100.0 * matrix.counts[k, _INDEX[o]] / row_total
            )
            for o in STANCE_ORDER
        }

    return EvaluationReport(matrix, per_class, micro, macro, deviations, flags)


def score(truths, predictions) -> EvaluationReport:
    return report_from_confusion(ConfusionMatrix.from_pairs(truths, predictions))


def micro_average_across_folds(matrices) -> EvaluationReport:
    """Pool confusion counts over folds, then compute the measures once."""
    matrices = list(matrices)
    if not matrices:
        raise ValueError("need at least one fold")
    pooled = matrices[0]
    for m in matrices[1:]:
        pooled = pooled + m
    return report_from_confusion(pooled)
