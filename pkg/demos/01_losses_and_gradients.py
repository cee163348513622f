"""
Losses and their logit gradients
================================

Cross entropy only looks at the probability of the true class. Complement
entropy looks at how the remaining mass is spread over the wrong classes,
and complement cross entropy adds a negatively weighted copy of it.
"""

import math

import numpy as np

from ccelab import (
    LossConfig,
    OneHotBatch,
    ProbBatch,
    complement_cross_entropy,
    complement_entropy,
    cross_entropy,
    softmax,
)

# Two predictions with the same true-class probability (0.5) ...
flat = ProbBatch.from_probs([[0.5, 0.25, 0.25]])
peaked = ProbBatch.from_probs([[0.5, 0.45, 0.05]])
y = OneHotBatch([0], 3)

# ... have the same cross entropy, -ln 0.5
print("CE      flat %.6f  peaked %.6f" % (cross_entropy(flat, y).value, cross_entropy(peaked, y).value))

# but different complement entropy: ln 2 is the maximum for two wrong classes
print("C       flat %.6f  peaked %.6f  (ln 2 = %.6f)" % (
    complement_entropy(flat, y).value, complement_entropy(peaked, y).value, math.log(2)))

# CCE = CE + (gamma / (K - 1)) * C with gamma = -1, so the flat prediction scores lower
cfg = LossConfig(gamma=-1.0)
for name, pb in (("flat", flat), ("peaked", peaked)):
    print("CCE    %-6s %.6f" % (name, complement_cross_entropy(pb.logits, y, cfg).value))

# Gradients are analytic. Compare against central differences.
rng = np.random.default_rng(0)
z = rng.uniform(-5, 5, size=(8, 10))
labels = OneHotBatch(rng.integers(0, 10, 8), 10)
analytic = complement_cross_entropy(z, labels, cfg).grad_logits
numeric = np.zeros_like(z)
h = 1e-6
for idx in np.ndindex(z.shape):
    zp, zm = z.copy(), z.copy()
    zp[idx] += h
    zm[idx] -= h
    numeric[idx] = (complement_cross_entropy(zp, labels, cfg).value
                    - complement_cross_entropy(zm, labels, cfg).value) / (2 * h)
print("max |analytic - numeric| = %.2e" % np.max(np.abs(analytic - numeric)))

# The complement term never pushes on the true-class logit
comp = complement_entropy(softmax(z), labels).grad_logits
print("complement grad on true logits:", comp[np.arange(8), labels.labels])
