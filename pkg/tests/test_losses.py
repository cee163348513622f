import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccelab.errors import ConfigurationError, EmptyInputError, InvalidShapeError
from ccelab.losses import (
    LossConfig,
    balanced_complement_entropy,
    complement_cross_entropy,
    complement_cross_entropy_from_probs,
    complement_entropy,
    cross_entropy,
    focal_loss,
    modulated_complement_entropy,
)
from ccelab.tensor import OneHotBatch, ProbBatch, softmax

from conftest import central_diff, rel_error, scalar_complement_entropy, scalar_softmax

# -(0.6 ln 0.6 + 0.4 ln 0.4), computed by hand
C_EXAMPLE = 0.6730116670092565


def row(probs, g=0):
    return ProbBatch.from_probs([probs]), OneHotBatch([g], len(probs))


LOSSES = {
    "cross_entropy": lambda z, y, cfg: cross_entropy(softmax(z), y),
    "complement_entropy": lambda z, y, cfg: complement_entropy(softmax(z), y, cfg.epsilon),
    "balanced": lambda z, y, cfg: balanced_complement_entropy(softmax(z), y, cfg),
    "modulated": lambda z, y, cfg: modulated_complement_entropy(softmax(z), y, cfg),
    "cce": lambda z, y, cfg: complement_cross_entropy(z, y, cfg),
    "focal": lambda z, y, cfg: focal_loss(softmax(z), y, cfg),
}


class TestCrossEntropy:
    def test_hand_value(self):
        rep = cross_entropy(*row([0.7, 0.2, 0.1]))
        assert rep.value == pytest.approx(0.35667494393873245, abs=1e-12)

    @pytest.mark.parametrize("k", [2, 3, 10])
    def test_uniform_is_log_k(self, k):
        y = OneHotBatch([0, k - 1], k)
        assert cross_entropy(softmax(np.zeros((2, k))), y).value == pytest.approx(math.log(k), abs=1e-12)

    def test_perfect_prediction(self):
        assert cross_entropy(*row([1.0, 0.0, 0.0])).value == pytest.approx(0.0, abs=1e-12)

    def test_empty_batch(self):
        with pytest.raises(EmptyInputError):
            cross_entropy(softmax(np.zeros((0, 3)) + 0.0), OneHotBatch([], 3))

    def test_grad_rows_sum_to_zero(self, rng):
        z = rng.normal(size=(6, 4))
        rep = cross_entropy(softmax(z), OneHotBatch(rng.integers(0, 4, 6), 4))
        np.testing.assert_allclose(rep.grad_logits.sum(axis=1), 0.0, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidShapeError):
            cross_entropy(softmax(np.zeros((2, 3))), OneHotBatch([0], 3))


class TestComplementEntropy:
    def test_uniform_incorrect(self):
        assert complement_entropy(*row([0.5, 0.25, 0.25])).value == pytest.approx(math.log(2), abs=1e-12)

    def test_hand_value(self):
        assert complement_entropy(*row([0.5, 0.3, 0.2])).value == pytest.approx(C_EXAMPLE, abs=1e-12)

    def test_matches_scalar_oracle(self, rng):
        z = rng.uniform(-5, 5, size=(12, 6))
        g = rng.integers(0, 6, 12)
        expected = scalar_complement_entropy([scalar_softmax(r) for r in z.tolist()], g.tolist())
        assert complement_entropy(softmax(z), OneHotBatch(g, 6)).value == pytest.approx(expected, rel=1e-12)

    def test_degenerate_sample(self):
        rep = complement_entropy(*row([1 - 1e-15, 5e-16, 5e-16]))
        assert rep.value == 0.0
        assert np.all(rep.grad_logits == 0.0)

    def test_two_classes_is_zero(self, rng):
        z = rng.normal(size=(4, 2))
        rep = complement_entropy(softmax(z), OneHotBatch([0, 1, 1, 0], 2))
        assert rep.value == 0.0
        assert np.all(rep.grad_logits == 0.0)

    def test_no_gradient_on_truth_logit(self, rng):
        z = rng.normal(size=(5, 4))
        y = OneHotBatch([0, 1, 2, 3, 0], 4)
        grad = complement_entropy(softmax(z), y).grad_logits
        assert np.all(grad[np.arange(5), y.labels] == 0.0)

    @settings(max_examples=200)
    @given(st.lists(st.floats(-30, 30), min_size=3, max_size=9), st.data())
    def test_bounds(self, logits, data):
        k = len(logits)
        g = data.draw(st.integers(0, k - 1))
        v = complement_entropy(softmax([logits]), OneHotBatch([g], k)).value
        assert -1e-12 <= v <= math.log(k - 1) + 1e-12

    def test_upper_bound_attained_only_when_uniform(self):
        assert complement_entropy(*row([0.1, 0.3, 0.3, 0.3])).value == pytest.approx(math.log(3), abs=1e-9)
        assert complement_entropy(*row([0.1, 0.31, 0.3, 0.29])).value < math.log(3) - 1e-9


class TestScaledVariants:
    def test_balanced_hand_value(self):
        assert balanced_complement_entropy(*row([0.5, 0.3, 0.2])).value == pytest.approx(C_EXAMPLE / 2, abs=1e-12)

    def test_balanced_two_class_equals_raw(self, rng):
        pb = softmax(rng.normal(size=(3, 2)))
        y = OneHotBatch([0, 1, 0], 2)
        assert balanced_complement_entropy(pb, y).value == complement_entropy(pb, y).value

    def test_modulated_hand_value(self):
        rep = modulated_complement_entropy(*row([0.5, 0.3, 0.2]), LossConfig(gamma=-1))
        assert rep.value == pytest.approx(-C_EXAMPLE / 2, abs=1e-12)

    def test_modulated_linear_in_gamma(self, rng):
        pb = softmax(rng.normal(size=(4, 5)))
        y = OneHotBatch([0, 1, 2, 3], 5)
        one = modulated_complement_entropy(pb, y, LossConfig(gamma=-1))
        two = modulated_complement_entropy(pb, y, LossConfig(gamma=-2))
        assert two.value == 2 * one.value
        np.testing.assert_array_equal(two.grad_logits, 2 * one.grad_logits)

    def test_gamma_zero_annihilates(self, rng):
        pb = softmax(rng.normal(size=(4, 5)))
        rep = modulated_complement_entropy(pb, OneHotBatch([0, 1, 2, 3], 5), LossConfig(gamma=0))
        assert rep.value == 0.0
        assert not np.any(rep.grad_logits)


class TestComplementCrossEntropy:
    def test_hand_value(self):
        pb, y = row([0.5, 0.3, 0.2])
        rep = complement_cross_entropy(pb.logits, y, LossConfig(gamma=-1))
        assert rep.value == pytest.approx(0.356641347055317, abs=1e-9)

    def test_perfect_prediction(self):
        pb, y = row([1.0, 0.0, 0.0])
        assert complement_cross_entropy(pb.logits, y).value == pytest.approx(0.0, abs=1e-12)

    def test_positive_gamma_rejected(self):
        with pytest.raises(ConfigurationError):
            complement_cross_entropy(np.zeros((1, 3)), OneHotBatch([0], 3), LossConfig(gamma=0.0))

    def test_is_sum_of_terms(self, rng):
        z = rng.normal(size=(7, 5))
        y = OneHotBatch(rng.integers(0, 5, 7), 5)
        cfg = LossConfig(gamma=-1.5)
        pb = softmax(z)
        ce = cross_entropy(pb, y)
        mod = modulated_complement_entropy(pb, y, cfg)
        rep = complement_cross_entropy(z, y, cfg)
        assert rep.value == ce.value + mod.value
        np.testing.assert_array_equal(rep.grad_logits, ce.grad_logits + mod.grad_logits)
        again = complement_cross_entropy_from_probs(pb, y, cfg)
        assert again.value == rep.value


class TestFocal:
    def test_zero_focus_is_cross_entropy(self, rng):
        pb = softmax(rng.normal(size=(5, 4)))
        y = OneHotBatch([0, 1, 2, 3, 0], 4)
        f = focal_loss(pb, y, LossConfig(focal_focus=0))
        ce = cross_entropy(pb, y)
        assert f.value == pytest.approx(ce.value, abs=1e-12)
        np.testing.assert_array_equal(f.grad_logits, ce.grad_logits)

    def test_hand_value(self):
        rep = focal_loss(*row([0.9, 0.05, 0.05]), LossConfig(focal_focus=2))
        assert rep.value == pytest.approx(0.001053605156578263, rel=1e-9)

    def test_perfect_prediction(self):
        rep = focal_loss(*row([1.0, 0.0, 0.0]))
        assert rep.value == pytest.approx(0.0, abs=1e-12)
        assert np.all(np.isfinite(rep.grad_logits))

    def test_fractional_focus_at_certainty(self):
        rep = focal_loss(*row([1.0, 0.0, 0.0]), LossConfig(focal_focus=0.5))
        assert np.all(np.isfinite(rep.grad_logits))

    def test_negative_focus_rejected(self):
        with pytest.raises(ConfigurationError):
            focal_loss(*row([0.5, 0.5]), LossConfig(focal_focus=-1))


def test_epsilon_range():
    with pytest.raises(ConfigurationError):
        LossConfig(epsilon=1e-3)


@pytest.mark.parametrize("name", sorted(LOSSES))
@pytest.mark.parametrize("k", [2, 5, 10])
@pytest.mark.parametrize("n", [1, 8])
def test_gradient_matches_finite_differences(name, k, n, rng):
    cfg = LossConfig(gamma=-1.0, focal_focus=2.0)
    z = rng.uniform(-5, 5, size=(n, k))
    y = OneHotBatch(rng.integers(0, k, n), k)
    fn = LOSSES[name]
    analytic = fn(z, y, cfg).grad_logits
    numeric = central_diff(lambda zz: fn(zz, y, cfg).value, z)
    assert rel_error(analytic, numeric) < 1e-5


@pytest.mark.parametrize("name", sorted(LOSSES))
def test_shift_invariance(name, rng):
    z = rng.uniform(-5, 5, size=(6, 5))
    y = OneHotBatch(rng.integers(0, 5, 6), 5)
    cfg = LossConfig()
    shifted = z + rng.normal(size=(6, 1)) * 10
    assert LOSSES[name](shifted, y, cfg).value == pytest.approx(LOSSES[name](z, y, cfg).value, abs=1e-9)


@pytest.mark.parametrize("name", sorted(LOSSES))
def test_batch_decomposition(name, rng):
    z = rng.uniform(-5, 5, size=(9, 4))
    labels = rng.integers(0, 4, 9)
    cfg = LossConfig()
    whole = LOSSES[name](z, OneHotBatch(labels, 4), cfg).value
    parts = [(z[:4], labels[:4]), (z[4:], labels[4:])]
    weighted = sum(len(l) * LOSSES[name](p, OneHotBatch(l, 4), cfg).value for p, l in parts) / 9
    assert whole == pytest.approx(weighted, abs=1e-9)
