"""Dense numeric kernel: stable softmax, log-softmax and one-hot encoding.

Matrices are plain 2-D numpy arrays laid out sample-per-row. Nothing here
broadcasts beyond row-wise reductions.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidLabelError, InvalidShapeError

# log of the smallest positive normal float64; stands in for log(0)
_LOG_TINY = float(np.log(np.finfo(np.float64).tiny))


def as_matrix(x, dtype=np.float64):
    """Return ``x`` as a finite 2-D array of ``dtype``."""
    m = np.asarray(x, dtype=dtype)
    if m.ndim == 1:
        m = m[None, :]
    if m.ndim != 2:
        raise InvalidShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix contains non-finite entries")
    return m


def _check_logits(logits):
    z = as_matrix(logits, dtype=np.result_type(np.asarray(logits).dtype, np.float32))
    if z.shape[1] < 2:
        raise InvalidShapeError(f"need at least 2 classes, got {z.shape[1]}")
    return z


def logsumexp(z, axis=1):
    m = np.max(z, axis=axis, keepdims=True)
    return (m + np.log(np.sum(np.exp(z - m), axis=axis, keepdims=True))).squeeze(axis)


def log_softmax(logits):
    """Row-wise ``z - logsumexp(z)``."""
    z = _check_logits(logits)
    shifted = z - np.max(z, axis=1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))


@dataclass(frozen=True)
class ProbBatch:
    """Softmax outputs paired with the logits that produced them."""

    probs: np.ndarray
    logits: np.ndarray

    @property
    def shape(self):
        return self.probs.shape

    @property
    def log_probs(self):
        return log_softmax(self.logits)

    @classmethod
    def from_probs(cls, probs):
        """Wrap an explicit probability matrix.

        The stored logits are ``log(probs)`` (floored at the log of the
        smallest normal float for exact zeros), so ``softmax(logits)``
        reproduces ``probs`` up to rounding.
        """
        p = as_matrix(probs)
        if np.any(p < 0) or np.any(p > 1):
            raise InvalidInputError("probabilities must lie in [0, 1]")
        if not np.allclose(p.sum(axis=1), 1.0, atol=1e-6):
            raise InvalidInputError("probability rows must sum to 1")
        with np.errstate(divide="ignore"):
            logits = np.maximum(np.log(p), _LOG_TINY)
        return cls(probs=p, logits=logits)


def softmax(logits):
    """Max-subtracted softmax; returns a :class:`ProbBatch`."""
    z = _check_logits(logits)
    e = np.exp(z - np.max(z, axis=1, keepdims=True))
    return ProbBatch(probs=e / np.sum(e, axis=1, keepdims=True), logits=z)


@dataclass(frozen=True)
class OneHotBatch:
    """0-based integer class labels for ``num_classes`` classes."""

    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise InvalidShapeError("labels must be a 1-D sequence")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise InvalidLabelError("labels must be integers")
        labels = labels.astype(np.int64)
        if self.num_classes < 1:
            raise InvalidShapeError("num_classes must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise InvalidLabelError(
                f"labels must lie in [0, {self.num_classes}), got range "
                f"[{labels.min()}, {labels.max()}]"
            )
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return int(self.labels.shape[0])

    def __getitem__(self, idx):
        return OneHotBatch(self.labels[idx], self.num_classes)

    def counts(self):
        return np.bincount(self.labels, minlength=self.num_classes)


def one_hot(labels, dtype=np.float64):
    """Dense N x K indicator matrix for a :class:`OneHotBatch`."""
    out = np.zeros((len(labels), labels.num_classes), dtype=dtype)
    out[np.arange(len(labels)), labels.labels] = 1
    return out
