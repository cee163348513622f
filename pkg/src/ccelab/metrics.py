"""Confusion matrices, per-class recall and balanced accuracy."""

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInputError, InvalidIndexError, InvalidInputError, InvalidShapeError

log = logging.getLogger(__name__)


@dataclass
class ConfusionMatrix:
    """K x K counts; rows are the actual class, columns the predicted class."""

    counts: np.ndarray
    class_names: list = field(default=None)

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise InvalidShapeError(f"confusion matrix must be square, got {c.shape}")
        if np.any(c < 0):
            raise InvalidInputError("confusion counts must be non-negative")
        self.counts = c
        if self.class_names is None:
            self.class_names = [str(i) for i in range(c.shape[0])]
        elif len(self.class_names) != c.shape[0]:
            raise InvalidShapeError("one class name per row is required")

    @classmethod
    def zeros(cls, num_classes, class_names=None):
        return cls(np.zeros((num_classes, num_classes), dtype=np.int64), class_names)

    @property
    def num_classes(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return int(self.counts.sum())

    def __add__(self, other):
        if other.num_classes != self.num_classes:
            raise InvalidShapeError("cannot merge confusion matrices of different size")
        return ConfusionMatrix(self.counts + other.counts, list(self.class_names))

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(self.class_names)
            w.writerows(self.counts.tolist())

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        return cls(np.array([[int(v) for v in r] for r in rows[1:]], dtype=np.int64), rows[0])


def predict(probs):
    """Argmax per row; ``np.argmax`` already breaks ties at the lowest index."""
    return np.argmax(np.asarray(probs.probs), axis=1)


def accumulate(cm, probs, labels):
    """Return a new matrix with one count added per (actual, predicted) pair."""
    n, k = probs.shape
    if len(labels) != n or labels.num_classes != k or cm.num_classes != k:
        raise InvalidShapeError(
            f"probs {n}x{k}, labels {len(labels)} over {labels.num_classes}, "
            f"matrix {cm.num_classes}x{cm.num_classes}"
        )
    counts = cm.counts.copy()
    np.add.at(counts, (labels.labels, predict(probs)), 1)
    return ConfusionMatrix(counts, list(cm.class_names))


def recall(cm, class_i):
    """``N_ii / sum_j N_ij``; ``nan`` when the class has no samples."""
    if not 0 <= class_i < cm.num_classes:
        raise InvalidIndexError(f"class index {class_i} outside [0, {cm.num_classes})")
    row = cm.counts[class_i].sum()
    if row == 0:
        return math.nan
    return cm.counts[class_i, class_i] / row


def balanced_accuracy(cm):
    """Mean recall over the classes that have at least one sample.

    Empty classes are left out of the mean (and logged) instead of being
    counted as zero recall.
    """
    recalls = [recall(cm, i) for i in range(cm.num_classes)]
    defined = [r for r in recalls if not math.isnan(r)]
    if not defined:
        raise EmptyInputError("balanced accuracy of an empty evaluation")
    if len(defined) < len(recalls):
        empty = [i for i, r in enumerate(recalls) if math.isnan(r)]
        log.info("balanced accuracy excludes empty classes %s", empty)
    return float(np.mean(defined))


def accuracy(cm):
    if cm.total == 0:
        raise EmptyInputError("accuracy of an empty evaluation")
    return float(np.trace(cm.counts) / cm.total)
