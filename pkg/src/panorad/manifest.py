"""Dataset manifests: CSV rows of (path, label, patient_id, split).

A manifest is uniformly one task: every label is either a two-digit
tooth designation or a sex code (M/F). Paths are unique and resolved
relative to the manifest file's directory when read from disk.
"""

import csv
import os
from dataclasses import dataclass

from .errors import DataError
from .evaluation import SEX_LABELS, SampleRecord, fdi_names, parse_fdi

MANIFEST_COLUMNS = ("path", "label", "patient_id", "split")
TASKS = ("teeth", "sex")


def task_of_labels(labels):
    """'sex' when every label is M/F, 'teeth' when every label parses as FDI."""
    labels = list(labels)
    if not labels:
        raise DataError("cannot infer a task from zero labels")
    if all(lb in SEX_LABELS for lb in labels):
        return "sex"
    for lb in labels:
        try:
            parse_fdi(lb)
        except DataError:
            raise DataError(
                f"label {lb!r} is neither a sex code (M/F) nor a two-digit tooth label"
            ) from None
    return "teeth"


def class_names(task):
    if task == "sex":
        return SEX_LABELS
    if task == "teeth":
        return fdi_names()
    raise DataError(f"unknown task {task!r}")


def class_index(label, task):
    """Dense class id of a label under its task's fixed ordering."""
    if task == "sex":
        if label not in SEX_LABELS:
            raise DataError(f"label {label!r} is not a sex code")
        return SEX_LABELS.index(label)
    return parse_fdi(label).class_index


@dataclass(frozen=True)
class Manifest:
    """Validated sample rows plus the task they uniformly belong to."""

    records: tuple
    task: str

    def __post_init__(self):
        records = tuple(self.records)
        if not records:
            raise DataError("manifest has no rows")
        seen = set()
        for rec in records:
            if rec.path in seen:
                raise DataError(f"duplicate manifest path {rec.path!r}")
            seen.add(rec.path)
        task = task_of_labels(rec.label for rec in records)
        if self.task != task:
            raise DataError(f"labels are a {task!r} task, not {self.task!r}")
        object.__setattr__(self, "records", records)

    def __len__(self):
        return len(self.records)

    def split(self, name):
        """Records tagged with the given split."""
        if name not in ("train", "test", "unassigned"):
            raise DataError(f"unknown split {name!r}")
        return [rec for rec in self.records if rec.split == name]

    def labels_as_indices(self):
        return [class_index(rec.label, self.task) for rec in self.records]


def make_manifest(records) -> Manifest:
    records = tuple(records)
    if not records:
        raise DataError("manifest has no rows")
    return Manifest(records=records, task=task_of_labels(r.label for r in records))


def read_manifest(path) -> Manifest:
    """Parse a manifest CSV; image paths become absolute via the CSV's directory."""
    base = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    if not rows:
        raise DataError(f"manifest {path} is empty")
    if tuple(rows[0]) != MANIFEST_COLUMNS:
        raise DataError(
            f"manifest header must be {','.join(MANIFEST_COLUMNS)}, got {','.join(rows[0])}"
        )
    records = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 4:
            raise DataError(f"manifest line {i}: expected 4 columns, got {len(row)}")
        p, label, patient, split = (cell.strip() for cell in row)
        full = p if os.path.isabs(p) else os.path.join(base, p)
        records.append(SampleRecord(path=full, label=label, patient_id=patient,
                                    split=split or "unassigned"))
    return make_manifest(records)


def write_manifest(path, records):
    """Write rows with paths made relative to the CSV's directory when possible."""
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for rec in records:
            p = rec.path
            if os.path.isabs(p):
                try:
                    p = os.path.relpath(p, base)
                except ValueError:
                    pass
            writer.writerow([p, rec.label, rec.patient_id, rec.split])
