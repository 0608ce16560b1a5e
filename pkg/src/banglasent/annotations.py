"""Three-way sentiment labels, label transforms, and dual-annotation agreement.

Every sample carries two independent annotations. The transforms here turn
the three-way labels (positive / negative / ambiguous) into integer class
targets for the classifier, either by dropping ambiguous rows (``apply_ra``)
or by promoting ambiguous to a third class (``apply_ato2``). Agreement
between the two annotation columns is summarized as a 3x3 confusion matrix.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

__all__ = [
    "Label",
    "AgreementReport",
    "apply_ra",
    "apply_ato2",
    "ra_classes",
    "ato2_classes",
    "confusion_matrix",
    "cohen_kappa",
]


class Label(enum.Enum):
    """A single annotator's verdict on one text sample."""

    NEGATIVE = "0"
    POSITIVE = "1"
    AMBIGUOUS = "A"

    @classmethod
    def parse(cls, text: str) -> "Label":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(
                f"unknown label {text!r}: expected one of '0', '1', 'A'"
            ) from None

    def format(self) -> str:
        return self.value

    @property
    def class_index(self) -> int:
        """Class id used by the three-class head: 0, 1, or 2 for ambiguous."""
        return _CLASS_INDEX[self]


_CLASS_INDEX = {Label.NEGATIVE: 0, Label.POSITIVE: 1, Label.AMBIGUOUS: 2}

# Matrix axes follow the conventional positive / negative / ambiguous
# presentation order, which differs from the class indices above.
_MATRIX_ORDER = (Label.POSITIVE, Label.NEGATIVE, Label.AMBIGUOUS)
_MATRIX_INDEX = {label: i for i, label in enumerate(_MATRIX_ORDER)}
MATRIX_NAMES = ("Positive", "Negative", "Ambiguous")


def _select_labels(dataset, which: str) -> Sequence[Label]:
    if which == "label1":
        return dataset.labels1
    if which == "label2":
        return dataset.labels2
    raise ValueError(f"which must be 'label1' or 'label2', got {which!r}")


def ra_classes(labels: Sequence[Label]) -> tuple[np.ndarray, np.ndarray]:
    """Drop ambiguous labels; return (keep mask, classes for kept rows).

    Kept labels map to {negative: 0, positive: 1} and keep their order.
    """
    keep = np.array([lab is not Label.AMBIGUOUS for lab in labels], dtype=bool)
    classes = np.array(
        [lab.class_index for lab in labels if lab is not Label.AMBIGUOUS],
        dtype=np.int64,
    )
    return keep, classes


def ato2_classes(labels: Sequence[Label]) -> np.ndarray:
    """Map every label to a class index, ambiguous becoming class 2."""
    return np.array([lab.class_index for lab in labels], dtype=np.int64)


def apply_ra(dataset, which: str):
    """Remove rows whose selected label is ambiguous.

    `dataset` is any row container exposing ``labels1``, ``labels2`` and a
    ``subset(mask)`` method (see ``corpus.EncodedDataset``). Returns the
    filtered dataset and the binary class array for the selected column.
    Raises ValueError if nothing survives.
    """
    labels = _select_labels(dataset, which)
    if len(labels) == 0:
        raise ValueError("dataset is empty")
    keep, classes = ra_classes(labels)
    if not keep.any():
        raise ValueError(
            f"no rows left after dropping ambiguous {which} labels"
        )
    return dataset.subset(keep), classes


def apply_ato2(dataset, which: str):
    """Keep every row; ambiguous labels become class 2.

    Returns the dataset unchanged together with the three-way class array
    for the selected column.
    """
    labels = _select_labels(dataset, which)
    if len(labels) == 0:
        raise ValueError("dataset is empty")
    return dataset, ato2_classes(labels)


@dataclass(frozen=True)
class AgreementReport:
    """Agreement statistics between the two annotation columns.

    ``matrix[r][c]`` counts samples labelled ``MATRIX_NAMES[r]`` by the
    first annotator and ``MATRIX_NAMES[c]`` by the second.
    """

    matrix: tuple[tuple[int, int, int], ...]
    total: int

    @property
    def trace(self) -> int:
        return sum(self.matrix[i][i] for i in range(3))

    @property
    def agreement_rate(self) -> Fraction:
        """Exact fraction of samples where both annotators agree."""
        return Fraction(self.trace, self.total)

    def cohen_kappa(self) -> float:
        """Chance-corrected agreement. Reported as an extension alongside
        the raw rate, which ignores chance-level agreement."""
        return cohen_kappa(self.matrix)

    def to_json(self, include_kappa: bool = True) -> str:
        payload = {
            "order": list(MATRIX_NAMES),
            "matrix": [list(row) for row in self.matrix],
            "total": self.total,
            "trace": self.trace,
            "agreement_rate": float(self.agreement_rate),
        }
        if include_kappa:
            # Not part of the core report; flagged so consumers can ignore it.
            payload["extensions"] = {"cohen_kappa": self.cohen_kappa()}
        return json.dumps(payload, indent=2)

    def to_table(self) -> str:
        """Aligned text table, first-annotator rows by second-annotator columns."""
        corner = "1st / 2nd"
        width = max(len(name) for name in MATRIX_NAMES + (corner,))
        width = max(width, max(len(str(v)) for row in self.matrix for v in row))
        header = " | ".join(
            [f"{corner:<{width}}"] + [f"{n:>{width}}" for n in MATRIX_NAMES]
        )
        sep = "-+-".join(["-" * width] * 4)
        lines = [header, sep]
        for name, row in zip(MATRIX_NAMES, self.matrix):
            lines.append(
                " | ".join([f"{name:<{width}}"] + [f"{v:>{width}}" for v in row])
            )
        lines.append(sep)
        rate = self.agreement_rate
        lines.append(
            f"agreement: {self.trace}/{self.total} = {float(rate):.4f}"
        )
        return "\n".join(lines)


def confusion_matrix(
    labels1: Sequence[Label], labels2: Sequence[Label]
) -> AgreementReport:
    """Count first-annotator rows against second-annotator columns."""
    if len(labels1) != len(labels2):
        raise ValueError(
            f"label arrays differ in length: {len(labels1)} vs {len(labels2)}"
        )
    if len(labels1) == 0:
        raise ValueError("label arrays are empty")
    counts = [[0, 0, 0] for _ in range(3)]
    for a, b in zip(labels1, labels2):
        counts[_MATRIX_INDEX[a]][_MATRIX_INDEX[b]] += 1
    matrix = tuple(tuple(row) for row in counts)
    return AgreementReport(matrix=matrix, total=len(labels1))


def cohen_kappa(matrix) -> float:
    """Cohen's kappa for a square count matrix: (p_o - p_e) / (1 - p_e)."""
    m = np.asarray(matrix, dtype=np.float64)
    total = m.sum()
    if total <= 0:
        raise ValueError("matrix counts sum to zero")
    p_observed = np.trace(m) / total
    p_expected = float(np.dot(m.sum(axis=1), m.sum(axis=0))) / (total * total)
    if p_expected == 1.0:
        return 1.0
    return float((p_observed - p_expected) / (1.0 - p_expected))
