"""Training objectives for softmax classifiers, each with its logit gradient.

All losses are batch means. Gradients are taken with respect to the
logits ``z`` (not the probabilities), which is what backpropagation into
the model consumes.

Complement entropy gradient
---------------------------
For one sample with ground-truth index ``g`` and softmax output ``p``, the
renormalised incorrect-class distribution is

    q_j = p_j / (1 - p_g) = exp(z_j) / sum_{k != g} exp(z_k),   j != g

i.e. a softmax over the incorrect logits alone, so ``q`` does not depend on
``z_g`` at all. With ``H = -sum_{j != g} q_j log q_j`` and
``d q_j / d z_k = q_j (delta_jk - q_k)`` for ``j, k != g``:

    dH/dz_k = -sum_j (log q_j + 1) q_j (delta_jk - q_k)
            = -q_k (log q_k + H)          for k != g
    dH/dz_g = 0

The batch value is ``mean_i H_i`` so the per-row gradient is divided by N.
Samples with ``1 - p_g <= epsilon`` are treated as degenerate and
contribute zero value and zero gradient.

Focal loss gradient
-------------------
With ``u = 1 - p_g`` and focusing exponent ``f``, ``L = -u^f log p_g`` and
``d p_g / d z_k = p_g (delta_gk - p_k)``, giving

    dL/dz_k = (f u^(f-1) p_g log p_g - u^f) (delta_gk - p_k)

which collapses to ``p - y`` at ``f = 0``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, EmptyInputError, InvalidShapeError
from .tensor import OneHotBatch, ProbBatch, logsumexp, one_hot, softmax


@dataclass(frozen=True)
class LossConfig:
    gamma: float = -1.0
    focal_focus: float = 2.0
    epsilon: float = 1e-12

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1e-6):
            raise ConfigurationError(f"epsilon must lie in (0, 1e-6], got {self.epsilon}")


@dataclass(frozen=True)
class LossReport:
    value: float
    grad_logits: np.ndarray


def _check(probs, labels):
    n, k = probs.shape
    if n == 0:
        raise EmptyInputError("loss of an empty batch is undefined")
    if len(labels) != n or labels.num_classes != k:
        raise InvalidShapeError(
            f"batch is {n}x{k} but labels have length {len(labels)} "
            f"over {labels.num_classes} classes"
        )
    return n, k


def _truth(labels):
    return np.arange(len(labels)), labels.labels


def cross_entropy(probs: ProbBatch, labels: OneHotBatch) -> LossReport:
    """Softmax cross entropy ``-mean log p_g``, evaluated via log-softmax."""
    n, _ = _check(probs, labels)
    logp = probs.log_probs
    value = -np.mean(logp[_truth(labels)])
    grad = (probs.probs - one_hot(labels)) / n
    return LossReport(float(value), grad)


def _complement_parts(probs, labels, epsilon):
    """Per-sample complement entropy and its (unscaled) logit gradient."""
    n, k = _check(probs, labels)
    if k < 2:
        raise InvalidShapeError("complement entropy needs at least 2 classes")
    rows, g = _truth(labels)
    z = np.asarray(probs.logits, dtype=np.float64)
    z_inc = z.copy()
    z_inc[rows, g] = -np.inf
    lse_inc = logsumexp(z_inc)
    # 1 - p_g without cancellation
    rest_mass = np.exp(lse_inc - logsumexp(z))
    log_q = z_inc - lse_inc[:, None]
    q = np.exp(log_q)
    q_log_q = np.where(q > 0, q * np.where(q > 0, log_q, 0.0), 0.0)
    ent = -np.sum(q_log_q, axis=1)
    grad = -q * (np.where(q > 0, log_q, 0.0) + ent[:, None])
    grad[rows, g] = 0.0
    degenerate = rest_mass <= epsilon
    ent[degenerate] = 0.0
    grad[degenerate] = 0.0
    return ent, grad


def complement_entropy(probs: ProbBatch, labels: OneHotBatch, epsilon: float = 1e-12) -> LossReport:
    """Mean Shannon entropy of the prediction restricted to incorrect classes."""
    ent, grad = _complement_parts(probs, labels, epsilon)
    n = ent.shape[0]
    return LossReport(float(np.mean(ent)), grad / n)


def _scaled_complement(probs, labels, epsilon, scale):
    base = complement_entropy(probs, labels, epsilon)
    return LossReport(scale * base.value, scale * base.grad_logits)


def balanced_complement_entropy(probs: ProbBatch, labels: OneHotBatch,
                                cfg: LossConfig = LossConfig()) -> LossReport:
    """Complement entropy divided by ``K - 1``."""
    k = probs.shape[1]
    return _scaled_complement(probs, labels, cfg.epsilon, 1.0 / (k - 1))


def modulated_complement_entropy(probs: ProbBatch, labels: OneHotBatch,
                                 cfg: LossConfig = LossConfig()) -> LossReport:
    """Complement entropy scaled by ``gamma / (K - 1)``."""
    k = probs.shape[1]
    return _scaled_complement(probs, labels, cfg.epsilon, cfg.gamma / (k - 1))


def complement_cross_entropy_from_probs(probs: ProbBatch, labels: OneHotBatch,
                                        cfg: LossConfig = LossConfig()) -> LossReport:
    if cfg.gamma >= 0:
        raise ConfigurationError(
            f"complement cross entropy needs gamma < 0, got {cfg.gamma}; "
            "a non-negative gamma rewards peaked incorrect-class predictions"
        )
    ce = cross_entropy(probs, labels)
    mod = modulated_complement_entropy(probs, labels, cfg)
    return LossReport(ce.value + mod.value, ce.grad_logits + mod.grad_logits)


def complement_cross_entropy(logits, labels: OneHotBatch,
                             cfg: LossConfig = LossConfig()) -> LossReport:
    """Cross entropy plus the gamma-modulated complement entropy.

    Both terms share one softmax evaluation, and the gradient is the sum of
    the two term gradients, so a single backward pass suffices.
    """
    if cfg.gamma >= 0:
        raise ConfigurationError(f"complement cross entropy needs gamma < 0, got {cfg.gamma}")
    return complement_cross_entropy_from_probs(softmax(logits), labels, cfg)


def focal_loss(probs: ProbBatch, labels: OneHotBatch, cfg: LossConfig = LossConfig()) -> LossReport:
    """``-mean (1 - p_g)^f log p_g`` with ``f = cfg.focal_focus``."""
    f = cfg.focal_focus
    if f < 0:
        raise ConfigurationError(f"focal_focus must be >= 0, got {f}")
    n, k = _check(probs, labels)
    rows, g = _truth(labels)
    z = np.asarray(probs.logits, dtype=np.float64)
    logp_g = probs.log_probs[rows, g]
    p_g = probs.probs[rows, g]
    z_inc = z.copy()
    z_inc[rows, g] = -np.inf
    u = np.exp(logsumexp(z_inc) - logsumexp(z))
    weight = u ** f
    value = -np.mean(weight * logp_g)
    if f == 0:
        slope = np.zeros_like(u)
    else:
        # u^(f-1) blows up as u -> 0 for f < 1, but log p_g -> 0 faster
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = f * u ** (f - 1) * p_g * logp_g
        slope = np.where(u > 0, slope, 0.0)
    coef = slope - weight
    grad = coef[:, None] * (one_hot(labels) - probs.probs) / n
    return LossReport(float(value), grad)
