"""Datasets: synthetic blobs, IDX and CSV loaders, normalisation, batching."""

import csv
import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    CCELabError,
    ConfigurationError,
    ConsistencyError,
    EmptyInputError,
    FormatError,
    InvalidInputError,
    InvalidShapeError,
    ParseError,
)
from .tensor import OneHotBatch

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class TruncatedFileError(CCELabError, OSError):
    category = "io"


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: OneHotBatch
    name: str = "dataset"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 2:
            raise InvalidShapeError(f"features must be 2-D, got {x.shape}")
        if x.shape[0] != len(self.labels):
            raise InvalidShapeError(
                f"{x.shape[0]} feature rows but {len(self.labels)} labels"
            )
        x.setflags(write=False)
        object.__setattr__(self, "features", x)

    def __len__(self):
        return self.features.shape[0]

    @property
    def num_classes(self):
        return self.labels.num_classes

    @property
    def dims(self):
        return self.features.shape[1]

    @property
    def class_counts(self):
        """Samples per class, indexed by class id."""
        return self.labels.counts()

    def subset(self, indices, name=None):
        idx = np.asarray(indices, dtype=np.int64)
        return replace(
            self,
            features=self.features[idx],
            labels=self.labels[idx],
            name=self.name if name is None else name,
            metadata=dict(self.metadata),
        )


@dataclass(frozen=True)
class BatchPlan:
    batch_size: int = 128
    shuffle_seed: int = 0
    drop_last: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")


def blob_means(num_classes, dims, class_separation):
    """Class centres evenly spaced on a circle in the first two dimensions."""
    angles = 2 * np.pi * np.arange(num_classes) / num_classes
    means = np.zeros((num_classes, dims))
    means[:, 0] = class_separation * np.cos(angles)
    means[:, 1] = class_separation * np.sin(angles)
    return means


def generate_blobs(num_classes, per_class, dims=2, class_separation=3.0,
                   noise_std=1.0, seed=0, name="blobs"):
    """Balanced isotropic Gaussian blobs, fully determined by ``seed``.

    Samples are ordered class by class.
    """
    if num_classes < 2 or per_class < 1 or dims < 2:
        raise InvalidInputError("need num_classes >= 2, per_class >= 1, dims >= 2")
    if noise_std < 0 or not math.isfinite(noise_std):
        raise InvalidInputError(f"noise_std must be a finite value >= 0, got {noise_std}")
    rng = np.random.default_rng(seed)
    means = blob_means(num_classes, dims, class_separation)
    labels = np.repeat(np.arange(num_classes), per_class)
    noise = rng.standard_normal((labels.size, dims))
    features = means[labels] + noise_std * noise
    return LabeledDataset(features, OneHotBatch(labels, num_classes), name=name)


def _read_idx(path, expected_magic):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 4:
        raise TruncatedFileError(f"{path}: file too short for an IDX header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise FormatError(f"{path}: bad IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise TruncatedFileError(f"{path}: truncated IDX dimension header")
    shape = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(shape))
    if len(raw) - header < size:
        raise TruncatedFileError(f"{path}: expected {size} data bytes, found {len(raw) - header}")
    data = np.frombuffer(raw, dtype=np.uint8, count=size, offset=header)
    return data.reshape(shape)


def load_idx(images_path, labels_path, num_classes=None, name=None):
    """Load an IDX image/label pair (unsigned-byte data, e.g. Fashion-MNIST).

    Images are flattened row-major and scaled to [0, 1] by dividing by 255.
    """
    images = _read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise ConsistencyError(
            f"{images.shape[0]} images but {labels.shape[0]} labels"
        )
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if labels.size else 2
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return LabeledDataset(
        features,
        OneHotBatch(labels.astype(np.int64), max(num_classes, 2)),
        name=name or str(images_path),
        metadata={"image_shape": list(images.shape[1:])},
    )


def write_idx(path, array):
    """Write a uint8 array as IDX (used for exporting imbalanced variants)."""
    a = np.ascontiguousarray(array, dtype=np.uint8)
    magic = 0x00000800 | a.ndim
    with open(path, "wb") as f:
        f.write(struct.pack(f">I{a.ndim}I", magic, *a.shape))
        f.write(a.tobytes())


def load_csv(path, label_column, name=None):
    """Load a headered CSV; every column other than ``label_column`` is a feature.

    Labels are re-encoded densely in order of first appearance; the original
    values are kept in ``metadata["label_names"]``.
    """
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path}: empty CSV file") from None
        if label_column not in header:
            raise ConfigurationError(f"{path}: no label column {label_column!r} in header {header}")
        li = header.index(label_column)
        feature_cols = [i for i in range(len(header)) if i != li]
        codes = {}
        rows, labels = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(f"{path}: line {lineno} has {len(rec)} fields, expected {len(header)}")
            row = []
            for i in feature_cols:
                try:
                    row.append(float(rec[i]))
                except ValueError:
                    raise ParseError(
                        f"{path}: line {lineno}, column {header[i]!r}: "
                        f"non-numeric value {rec[i]!r}"
                    ) from None
            rows.append(row)
            labels.append(codes.setdefault(rec[li], len(codes)))
    features = np.array(rows, dtype=np.float64).reshape(len(rows), len(feature_cols))
    return LabeledDataset(
        features,
        OneHotBatch(np.array(labels, dtype=np.int64), max(len(codes), 2)),
        name=name or str(path),
        metadata={"label_names": list(codes), "feature_names": [header[i] for i in feature_cols]},
    )


def normalize(train, *others):
    """Standardise every dataset with the training set's per-feature statistics.

    Features whose training std is below 1e-8 are only centred.
    Returns a tuple ``(train, *others)`` of new datasets.
    """
    if len(train) == 0:
        raise EmptyInputError("cannot normalise with an empty training set")
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    std = np.where(std < 1e-8, 1.0, std)
    stats = {"mean": mean.tolist(), "std": std.tolist()}
    out = []
    for ds in (train, *others):
        if ds.dims != train.dims:
            raise InvalidShapeError(f"{ds.name} has {ds.dims} features, train has {train.dims}")
        out.append(replace(ds, features=(ds.features - mean) / std,
                           metadata={**ds.metadata, "normalization": stats}))
    return tuple(out)


def batch_indices(n, plan, epoch):
    """Index slices for one epoch, shuffled with seed ``shuffle_seed ^ epoch``."""
    order = np.random.default_rng(plan.shuffle_seed ^ epoch).permutation(n)
    stop = n - n % plan.batch_size if plan.drop_last else n
    return [order[i:i + plan.batch_size] for i in range(0, stop, plan.batch_size)]


def batches(dataset, plan, epoch):
    """Yield ``(features, labels)`` mini-batches for one epoch."""
    if len(dataset) == 0:
        raise EmptyInputError("cannot batch an empty dataset")
    for idx in batch_indices(len(dataset), plan, epoch):
        yield dataset.features[idx], dataset.labels[idx]
