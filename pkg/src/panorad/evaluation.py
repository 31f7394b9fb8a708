"""Tooth labels, patient-level folds, confusion matrices, and report metrics.

Teeth use two-digit FDI notation: quadrant 1-4 then position 1-7 (third
molars, position 8, are excluded), giving 28 classes with class index
(quadrant-1)*7 + (position-1). Cross-validation folds are dealt at the
patient level so no patient's images appear on both sides of a split.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

TOOTH_CLASS_COUNT = 28
SEX_LABELS = ("M", "F")
SPLITS = ("train", "test", "unassigned")


@dataclass(frozen=True, order=True)
class FdiLabel:
    """Two-digit tooth designation: quadrant 1-4, position 1-7."""

    quadrant: int
    position: int

    def __post_init__(self):
        if not 1 <= self.quadrant <= 4:
            raise DataError(f"quadrant must be 1-4, got {self.quadrant}")
        if self.position == 8:
            raise DataError("position 8 (third molar) is excluded from the label set")
        if not 1 <= self.position <= 7:
            raise DataError(f"position must be 1-7, got {self.position}")

    @property
    def class_index(self):
        return (self.quadrant - 1) * 7 + (self.position - 1)

    def __str__(self):
        return f"{self.quadrant}{self.position}"


def parse_fdi(text) -> FdiLabel:
    """Parse a two-digit tooth designation such as '16' or '41'."""
    text = str(text).strip()
    if len(text) != 2 or not text.isdigit():
        raise DataError(f"tooth label must be two digits, got {text!r}")
    return FdiLabel(int(text[0]), int(text[1]))


def fdi_names():
    """All 28 labels as strings, ordered by class index."""
    return tuple(f"{q}{p}" for q in range(1, 5) for p in range(1, 8))


@dataclass(frozen=True)
class SampleRecord:
    """One dataset row: image path, label text, owning patient, split tag."""

    path: str
    label: str
    patient_id: str
    split: str = "unassigned"

    def __post_init__(self):
        if not self.path:
            raise DataError("sample path must be nonempty")
        if not self.label:
            raise DataError("sample label must be nonempty")
        if not self.patient_id:
            raise DataError("sample patient_id must be nonempty")
        if self.split not in SPLITS:
            raise DataError(f"split must be one of {SPLITS}, got {self.split!r}")


@dataclass(frozen=True)
class FoldPlan:
    """Patient-to-fold assignment for k-fold cross-validation."""

    k: int
    assignment: dict

    def fold_of(self, patient_id):
        if patient_id not in self.assignment:
            raise DataError(f"unknown patient {patient_id!r}")
        return self.assignment[patient_id]

    def fold_sizes(self):
        return np.bincount(list(self.assignment.values()), minlength=self.k)

    def patients(self, fold):
        return sorted(p for p, f in self.assignment.items() if f == fold)


def kfold_plan(records, k, seed=0) -> FoldPlan:
    """Deal patients (never single images) into ``k`` folds, shuffled by seed.

    When every label is a sex code the deal is stratified: each sex group is
    shuffled separately and dealt through the same round-robin cursor, so
    folds balance both overall size and group composition.
    """
    if k < 2:
        raise ConfigError(f"k must be at least 2, got {k}")
    label_of = {}
    for rec in records:
        label_of.setdefault(rec.patient_id, rec.label)
    patients = sorted(label_of)
    if len(patients) < k:
        raise DataError(f"need at least k={k} distinct patients, got {len(patients)}")
    rng = np.random.default_rng(seed)
    if all(label in SEX_LABELS for label in label_of.values()):
        groups = [[p for p in patients if label_of[p] == sex] for sex in sorted(SEX_LABELS)]
    else:
        groups = [patients]
    assignment = {}
    cursor = 0
    for group in groups:
        for i in rng.permutation(len(group)):
            assignment[group[i]] = cursor % k
            cursor += 1
    return FoldPlan(k=k, assignment=assignment)


def fold_split(records, plan: FoldPlan, fold):
    """Record indices for one fold: (train everywhere else, validate on fold)."""
    if not 0 <= fold < plan.k:
        raise ConfigError(f"fold must be in [0, {plan.k}), got {fold}")
    train, val = [], []
    for i, rec in enumerate(records):
        (val if plan.fold_of(rec.patient_id) == fold else train).append(i)
    return train, val


class ConfusionMatrix:
    """K x K counts; rows are true classes, entry (i, j) counts predictions j."""

    def __init__(self, k_classes):
        if k_classes < 1:
            raise ConfigError(f"need at least 1 class, got {k_classes}")
        self.counts = np.zeros((k_classes, k_classes), dtype=np.int64)

    @property
    def k_classes(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def accuracy(self):
        total = self.total
        return float(np.trace(self.counts)) / total if total else 0.0

    def merge(self, other):
        """Elementwise sum; order-independent across per-worker matrices."""
        if other.k_classes != self.k_classes:
            raise DataError(f"cannot merge {other.k_classes}-class into {self.k_classes}-class matrix")
        self.counts += other.counts


def confusion_accumulate(cm: ConfusionMatrix, true_class, predicted_class):
    k = cm.k_classes
    if not (0 <= true_class < k and 0 <= predicted_class < k):
        raise DataError(
            f"class ids ({true_class}, {predicted_class}) out of range for {k} classes"
        )
    cm.counts[true_class, predicted_class] += 1


def confusion_from_pairs(k_classes, true_classes, predicted_classes) -> ConfusionMatrix:
    cm = ConfusionMatrix(k_classes)
    for t, p in zip(true_classes, predicted_classes, strict=True):
        confusion_accumulate(cm, int(t), int(p))
    return cm


@dataclass(frozen=True)
class MetricsRow:
    """Per-class counts and the ratios they define."""

    class_id: int
    cp: int
    pcp: int
    tp: int
    precision: float
    recall: float
    f1: float


def metrics_from_counts(cp, pcp, tp, class_id=-1) -> MetricsRow:
    """precision = tp/pcp, recall = tp/cp, f1 = harmonic mean (0 when undefined)."""
    cp, pcp, tp = int(cp), int(pcp), int(tp)
    if min(cp, pcp, tp) < 0:
        raise DataError(f"counts must be non-negative, got ({cp}, {pcp}, {tp})")
    if tp > min(cp, pcp):
        raise DataError(f"tp={tp} exceeds min(cp={cp}, pcp={pcp})")
    precision = tp / pcp if pcp else 0.0
    recall = tp / cp if cp else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MetricsRow(class_id, cp, pcp, tp, precision, recall, f1)


def matrix_metrics(cm: ConfusionMatrix):
    """Per-class rows from the matrix marginals, plus overall accuracy."""
    cp = cm.counts.sum(axis=1)
    pcp = cm.counts.sum(axis=0)
    tp = np.diag(cm.counts)
    rows = [
        metrics_from_counts(cp[c], pcp[c], tp[c], class_id=c)
        for c in range(cm.k_classes)
    ]
    return rows, cm.accuracy


def write_metrics_csv(path, rows, names=None):
    """Report table: tooth,pcp,tp,precision,recall,f1 with 4-decimal ratios."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tooth", "pcp", "tp", "precision", "recall", "f1"])
        for row in rows:
            name = names[row.class_id] if names else str(row.class_id)
            writer.writerow([name, row.pcp, row.tp, f"{row.precision:.4f}",
                             f"{row.recall:.4f}", f"{row.f1:.4f}"])


def write_confusion_csv(path, cm: ConfusionMatrix, names=None):
    """Matrix layout: header of predicted names, one row per true class."""
    names = list(names) if names else [str(c) for c in range(cm.k_classes)]
    if len(names) != cm.k_classes:
        raise DataError(f"need {cm.k_classes} names, got {len(names)}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + names)
        for name, row in zip(names, cm.counts):
            writer.writerow([name] + [int(v) for v in row])
