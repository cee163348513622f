"""Long-tailed and step-shaped imbalanced variants of balanced datasets."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    InfeasibleRatioError,
    InsufficientSamplesError,
    InvalidDistributionError,
)

KINDS = ("long_tailed", "step")


@dataclass(frozen=True)
class ClassDistribution:
    """Per-class counts sorted largest first."""

    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if not counts:
            raise InvalidDistributionError("a distribution needs at least one class")
        if any(c < 1 for c in counts):
            raise InvalidDistributionError(f"every class needs >= 1 sample: {counts}")
        if any(a < b for a, b in zip(counts, counts[1:])):
            raise InvalidDistributionError(f"counts must be non-increasing: {counts}")
        object.__setattr__(self, "counts", counts)

    @property
    def imbalance_ratio(self):
        return self.counts[0] / self.counts[-1]

    @property
    def total(self):
        return sum(self.counts)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["class_index", "count"])
            w.writerows(enumerate(self.counts))


@dataclass(frozen=True)
class ImbalanceSpec:
    kind: str = "long_tailed"
    ratio: float = 100.0
    seed: int = 0

    def __post_init__(self):
        aliases = {"lt": "long_tailed", "long-tailed": "long_tailed"}
        kind = aliases.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ConfigurationError(f"imbalance kind must be one of {KINDS}, got {self.kind!r}")
        if not self.ratio >= 1:
            raise ConfigurationError(f"imbalance ratio must be >= 1, got {self.ratio}")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "kind", kind)


def _check_plan(base_count, num_classes, ratio):
    if num_classes < 2:
        raise ConfigurationError(f"need at least 2 classes, got {num_classes}")
    if ratio < 1:
        raise ConfigurationError(f"imbalance ratio must be >= 1, got {ratio}")
    if base_count < ratio:
        raise InfeasibleRatioError(
            f"base_count {base_count} < ratio {ratio}: the tail class would be empty"
        )


def _round(x):
    # half-up, so results do not depend on banker's rounding
    return max(1, int(math.floor(x + 0.5)))


def plan_long_tailed(base_count, num_classes, ratio):
    """Geometric decay from ``base_count`` down to ``base_count / ratio``."""
    _check_plan(base_count, num_classes, ratio)
    k = num_classes
    counts = [_round(base_count * ratio ** (-i / (k - 1))) for i in range(k)]
    return ClassDistribution(tuple(counts))


def plan_step(base_count, num_classes, ratio):
    """``ceil(K/2)`` classes keep ``base_count``; the rest get ``base_count / ratio``."""
    _check_plan(base_count, num_classes, ratio)
    major = math.ceil(num_classes / 2)
    minor = _round(base_count / ratio)
    return ClassDistribution((int(base_count),) * major + (minor,) * (num_classes - major))


def plan(spec, base_count, num_classes):
    fn = plan_long_tailed if spec.kind == "long_tailed" else plan_step
    return fn(base_count, num_classes, spec.ratio)


def assignment_order(class_counts):
    """Class ids ordered by descending size, ties broken by lower id."""
    counts = np.asarray(class_counts)
    return sorted(range(len(counts)), key=lambda c: (-counts[c], c))


def subsample_indices(dataset, spec):
    counts = dataset.class_counts
    order = assignment_order(counts)
    target = plan(spec, int(counts[order[0]]), dataset.num_classes)
    rng = np.random.default_rng(spec.seed)
    keep = []
    for cls, n_keep in zip(order, target.counts):
        members = np.flatnonzero(dataset.labels.labels == cls)
        if members.size < n_keep:
            raise InsufficientSamplesError(
                f"class {cls} has {members.size} samples, plan needs {n_keep}"
            )
        keep.append(np.sort(rng.choice(members, size=n_keep, replace=False)))
    return np.sort(np.concatenate(keep))


def subsample(dataset, spec):
    """Randomly drop samples per class so the counts follow the planned shape.

    The largest class sets the head count. The source dataset is not modified.
    """
    idx = subsample_indices(dataset, spec)
    out = dataset.subset(idx, name=f"{dataset.name}-{spec.kind}-{spec.ratio:g}")
    out.metadata["imbalance"] = {"kind": spec.kind, "ratio": spec.ratio, "seed": spec.seed}
    return out


def class_distribution(dataset):
    counts = dataset.class_counts
    if np.any(counts == 0):
        raise InvalidDistributionError(f"empty class in {dataset.name}: {counts.tolist()}")
    return ClassDistribution(tuple(sorted(counts.tolist(), reverse=True)))


def measure_ratio(dataset):
    """Largest class count over smallest class count."""
    return class_distribution(dataset).imbalance_ratio
