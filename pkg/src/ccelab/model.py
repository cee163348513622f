"""A small ReLU multilayer perceptron with hand-written backprop and SGD."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InvalidShapeError, NumericError, StateError


class MLP:
    """Fully connected network: ReLU on hidden layers, raw logits out.

    ``layer_dims`` is ``[input_dim, *hidden, num_classes]``. Weights are
    drawn from ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``; biases start at 0.
    """

    def __init__(self, layer_dims, seed=0):
        dims = [int(d) for d in layer_dims]
        if len(dims) < 2 or min(dims) < 1:
            raise InvalidShapeError(f"invalid layer dims {layer_dims}")
        self.layer_dims = dims
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self._cache = None

    @property
    def num_layers(self):
        return len(self.weights)

    def parameters(self):
        """Flat list ``[W0, b0, W1, b1, ...]`` of the live parameter arrays."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def forward(self, inputs):
        x = np.asarray(inputs, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.layer_dims[0]:
            raise InvalidShapeError(
                f"expected inputs of shape (N, {self.layer_dims[0]}), got {x.shape}"
            )
        acts = [x]
        h = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < self.num_layers - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        self._cache = acts
        return h

    __call__ = forward

    def backward(self, grad_logits):
        """Parameter gradients for the most recent :meth:`forward` call.

        Returns a list aligned with :meth:`parameters`.
        """
        if self._cache is None:
            raise StateError("backward called without a cached forward pass")
        acts = self._cache
        delta = np.asarray(grad_logits, dtype=np.float64)
        if delta.shape != acts[-1].shape:
            raise InvalidShapeError(f"grad shape {delta.shape} != logits shape {acts[-1].shape}")
        grads = [None] * (2 * self.num_layers)
        for i in reversed(range(self.num_layers)):
            grads[2 * i] = acts[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (acts[i] > 0)
        return grads

    def save(self, path):
        """Checkpoint as ``.npz``: ``layer_dims`` plus ``W{i}`` / ``b{i}`` arrays."""
        arrays = {"layer_dims": np.array(self.layer_dims, dtype=np.int64)}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            arrays[f"W{i}"] = w
            arrays[f"b{i}"] = b
        with open(path, "wb") as f:
            np.savez(f, **arrays)

    @classmethod
    def load(cls, path):
        with np.load(path) as data:
            model = cls(data["layer_dims"].tolist())
            for i in range(model.num_layers):
                model.weights[i] = data[f"W{i}"].copy()
                model.biases[i] = data[f"b{i}"].copy()
        return model


@dataclass(frozen=True)
class SgdConfig:
    base_lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    warmup_epochs: int = 5
    decay_epochs: tuple = (60, 120, 160)
    decay_factor: float = 0.5

    def __post_init__(self):
        if not 0 <= self.momentum < 1:
            raise ConfigurationError(f"momentum must be in [0, 1), got {self.momentum}")
        if not self.base_lr > 0:
            raise ConfigurationError(f"base_lr must be > 0, got {self.base_lr}")
        if not 0 < self.decay_factor <= 1:
            raise ConfigurationError(f"decay_factor must be in (0, 1], got {self.decay_factor}")
        if self.warmup_epochs < 0 or self.weight_decay < 0:
            raise ConfigurationError("warmup_epochs and weight_decay must be >= 0")
        object.__setattr__(self, "decay_epochs", tuple(int(d) for d in self.decay_epochs))

    def scaled_to(self, epochs, reference_epochs=200):
        """Same schedule with milestones rescaled to a shorter run."""
        scaled = tuple(int(round(d * epochs / reference_epochs)) for d in self.decay_epochs)
        return SgdConfig(self.base_lr, self.momentum, self.weight_decay,
                         self.warmup_epochs, scaled, self.decay_factor)


def lr_at(cfg, epoch):
    """Linear warm-up over ``warmup_epochs``, then step decay at each milestone."""
    if epoch < cfg.warmup_epochs:
        return cfg.base_lr * (epoch + 1) / cfg.warmup_epochs
    drops = sum(1 for d in cfg.decay_epochs if epoch >= d)
    return cfg.base_lr * cfg.decay_factor ** drops


@dataclass
class SGD:
    """Classical momentum SGD with L2 weight decay folded into the velocity.

    ``v <- momentum * v + g + weight_decay * theta``; ``theta <- theta - lr * v``.
    Ascent runs the same update on ``-g``, so weight decay keeps shrinking
    the parameters in both directions.
    """

    cfg: SgdConfig = field(default_factory=SgdConfig)
    velocity: list = None

    def step(self, model, grads, lr, sign="descend"):
        if sign not in ("descend", "ascend"):
            raise ConfigurationError(f"sign must be 'descend' or 'ascend', got {sign!r}")
        params = model.parameters()
        if len(grads) != len(params):
            raise InvalidShapeError("one gradient per parameter array is required")
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise NumericError("non-finite gradient passed to the optimizer")
        if self.velocity is None:
            self.velocity = [np.zeros_like(p) for p in params]
        m, wd = self.cfg.momentum, self.cfg.weight_decay
        for p, g, v in zip(params, grads, self.velocity):
            if sign == "ascend":
                g = -g
            v *= m
            v += g + wd * p
            p -= lr * v
        return model
