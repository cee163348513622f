"""Training regimes, gamma sweeps and result persistence.

Four objectives are supported:

``erm``
    plain softmax cross entropy.
``focal``
    focal loss.
``cot``
    bi-objective training: a cross-entropy descent step followed, on the
    same batch, by a fresh forward pass and an ascent step on the balanced
    complement entropy. Two optimizers with separate momentum buffers,
    two backward passes per iteration.
``cce``
    complement cross entropy, one forward and one backward pass.
"""

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from statistics import mean

import numpy as np

from . import data
from . import imbalance as imb
from .errors import ConfigurationError, TrainingDiverged
from .losses import (
    LossConfig,
    balanced_complement_entropy,
    complement_cross_entropy,
    cross_entropy,
    focal_loss,
)
from .metrics import ConfusionMatrix, accumulate, accuracy, balanced_accuracy
from .model import MLP, SGD, SgdConfig, lr_at
from .tensor import softmax

log = logging.getLogger(__name__)

OBJECTIVES = ("erm", "focal", "cot", "cce")
TIMING_FIELDS = ("epoch_wall_time", "timing")


@dataclass(frozen=True)
class DatasetSource:
    """Where the train/test data comes from.

    ``kind="blobs"`` takes :func:`ccelab.data.generate_blobs` arguments plus
    ``test_per_class``; the test set uses ``seed + 1``. ``kind="idx"`` needs
    ``train_images``, ``train_labels``, ``test_images``, ``test_labels``.
    ``kind="csv"`` needs ``train``, ``test`` and ``label_column``.
    """

    kind: str = "blobs"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("blobs", "idx", "csv"):
            raise ConfigurationError(f"unknown dataset kind {self.kind!r}")


BLOB_DEFAULTS = dict(num_classes=10, per_class=500, dims=8, class_separation=3.0,
                     noise_std=1.0, test_per_class=100, seed=None)


@dataclass(frozen=True)
class ExperimentConfig:
    objective: str = "cce"
    loss_cfg: LossConfig = field(default_factory=LossConfig)
    sgd_cfg: SgdConfig = field(default_factory=SgdConfig)
    batch_plan: data.BatchPlan = field(default_factory=data.BatchPlan)
    epochs: int = 200
    dataset: DatasetSource = field(default_factory=DatasetSource)
    imbalance: imb.ImbalanceSpec = None
    hidden: tuple = (64, 64)
    seed: int = 0
    output_dir: str = None

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ConfigurationError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.objective == "cce" and not self.loss_cfg.gamma < 0:
            raise ConfigurationError(f"cce needs gamma < 0, got {self.loss_cfg.gamma}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def dataset_label(self):
        label = self.dataset.params.get("name") or self.dataset.kind
        if self.imbalance is not None:
            kind = "lt" if self.imbalance.kind == "long_tailed" else "step"
            label += f"-{kind}-{self.imbalance.ratio:g}"
        return label

    @property
    def run_id(self):
        rid = f"{self.objective}-{self.dataset_label}-s{self.seed}"
        if self.objective == "cce":
            rid += f"-g{self.loss_cfg.gamma:g}"
        elif self.objective == "focal":
            rid += f"-f{self.loss_cfg.focal_focus:g}"
        return rid

    def to_dict(self):
        d = asdict(self)
        d["sgd_cfg"]["decay_epochs"] = list(self.sgd_cfg.decay_epochs)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kw = {}
        if "loss_cfg" in d:
            kw["loss_cfg"] = LossConfig(**d.pop("loss_cfg"))
        if "sgd_cfg" in d:
            kw["sgd_cfg"] = SgdConfig(**d.pop("sgd_cfg"))
        if "batch_plan" in d:
            kw["batch_plan"] = data.BatchPlan(**d.pop("batch_plan"))
        if "dataset" in d:
            kw["dataset"] = DatasetSource(**d.pop("dataset"))
        if d.get("imbalance") is not None:
            kw["imbalance"] = imb.ImbalanceSpec(**d.pop("imbalance"))
        d.pop("imbalance", None)
        return cls(**d, **kw)


def desk_config(objective="cce", epochs=30, seed=0, gamma=-1.0, ratio=100.0,
                kind="long_tailed", **blob_params):
    """Small blob experiment with the milestones rescaled to ``epochs``."""
    params = {**BLOB_DEFAULTS, **blob_params}
    return ExperimentConfig(
        objective=objective,
        loss_cfg=LossConfig(gamma=gamma),
        sgd_cfg=SgdConfig().scaled_to(epochs),
        batch_plan=data.BatchPlan(128, shuffle_seed=seed),
        epochs=epochs,
        dataset=DatasetSource("blobs", params),
        imbalance=None if ratio is None else imb.ImbalanceSpec(kind, ratio, seed),
        seed=seed,
    )


@dataclass
class RunResult:
    run_id: str
    objective: str
    dataset_label: str
    final_bacc: float
    per_epoch: list
    confusion: ConfusionMatrix
    timing: dict
    config_echo: dict

    def to_dict(self):
        return {
            "run_id": self.run_id,
            "objective": self.objective,
            "dataset_label": self.dataset_label,
            "final_bacc": self.final_bacc,
            "per_epoch": self.per_epoch,
            "confusion": {"class_names": self.confusion.class_names,
                          "counts": self.confusion.counts.tolist()},
            "timing": self.timing,
            "config_echo": self.config_echo,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        cm = d.pop("confusion")
        return cls(confusion=ConfusionMatrix(np.array(cm["counts"]), cm["class_names"]), **d)

    def to_json(self, drop_timing=False):
        d = self.to_dict()
        if drop_timing:
            d.pop("timing")
            d["per_epoch"] = [{k: v for k, v in r.items() if k not in TIMING_FIELDS}
                              for r in d["per_epoch"]]
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        return isinstance(other, RunResult) and self.to_json() == other.to_json()

    @property
    def mean_seconds_per_iteration(self):
        return self.timing["mean_seconds_per_iteration"]

    @property
    def backward_passes(self):
        return self.timing["backward_passes"]

    @property
    def iterations(self):
        return self.timing["iterations"]


def _blobs(params, seed, per_class_key, seed_offset, name_suffix):
    p = {**BLOB_DEFAULTS, **params}
    base_seed = seed if p["seed"] is None else p["seed"]
    return data.generate_blobs(
        p["num_classes"], p[per_class_key], p["dims"], p["class_separation"],
        p["noise_std"], seed=base_seed + seed_offset, name="blobs" + name_suffix,
    )


def load_datasets(cfg):
    """Training and test sets for ``cfg``: imbalance applied to train only, then normalised."""
    src = cfg.dataset
    p = src.params
    if src.kind == "blobs":
        train = _blobs(p, cfg.seed, "per_class", 0, "-train")
        test = _blobs(p, cfg.seed, "test_per_class", 1, "-test")
    elif src.kind == "idx":
        k = p.get("num_classes")
        train = data.load_idx(p["train_images"], p["train_labels"], num_classes=k)
        test = data.load_idx(p["test_images"], p["test_labels"],
                             num_classes=train.num_classes)
    else:
        train = data.load_csv(p["train"], p["label_column"])
        test = data.load_csv(p["test"], p["label_column"])
        if test.metadata["label_names"] != train.metadata["label_names"]:
            # re-encode test labels with the training mapping
            names = train.metadata["label_names"]
            lookup = {name: i for i, name in enumerate(names)}
            missing = set(test.metadata["label_names"]) - set(lookup)
            if missing:
                raise ConfigurationError(f"test labels {sorted(missing)} never appear in train")
            codes = np.array([lookup[test.metadata["label_names"][c]] for c in test.labels.labels])
            test = data.LabeledDataset(test.features, data.OneHotBatch(codes, train.num_classes),
                                       test.name, {**test.metadata, "label_names": names})
    if cfg.imbalance is not None:
        train = imb.subsample(train, cfg.imbalance)
    return data.normalize(train, test)


def evaluate(model, dataset, class_names=None):
    probs = softmax(model.forward(dataset.features))
    cm = accumulate(ConfusionMatrix.zeros(dataset.num_classes, class_names), probs, dataset.labels)
    return cm


class _Trainer:
    """Per-iteration update rule for one objective."""

    backward_per_iteration = 1

    def __init__(self, cfg, model):
        self.cfg = cfg
        self.model = model
        self.opt = SGD(cfg.sgd_cfg)

    def loss(self, logits, y):
        raise NotImplementedError

    def step(self, x, y, lr):
        logits = _forward(self.model, x)
        rep = self.loss(logits, y)
        _check_finite(rep)
        self.opt.step(self.model, self.model.backward(rep.grad_logits), lr, "descend")
        return rep.value


class _ErmTrainer(_Trainer):
    def loss(self, logits, y):
        return cross_entropy(softmax(logits), y)


class _FocalTrainer(_Trainer):
    def loss(self, logits, y):
        return focal_loss(softmax(logits), y, self.cfg.loss_cfg)


class _CceTrainer(_Trainer):
    def loss(self, logits, y):
        return complement_cross_entropy(logits, y, self.cfg.loss_cfg)


class _CotTrainer(_Trainer):
    backward_per_iteration = 2

    def __init__(self, cfg, model):
        super().__init__(cfg, model)
        self.secondary = SGD(cfg.sgd_cfg)

    def step(self, x, y, lr):
        primary = cross_entropy(softmax(_forward(self.model, x)), y)
        _check_finite(primary)
        self.opt.step(self.model, self.model.backward(primary.grad_logits), lr, "descend")
        # parameters moved, so the complement step needs fresh activations
        secondary = balanced_complement_entropy(softmax(_forward(self.model, x)), y,
                                                self.cfg.loss_cfg)
        _check_finite(secondary)
        self.secondary.step(self.model, self.model.backward(secondary.grad_logits), lr, "ascend")
        return primary.value


_TRAINERS = {"erm": _ErmTrainer, "focal": _FocalTrainer, "cce": _CceTrainer, "cot": _CotTrainer}


def _forward(model, x):
    with np.errstate(over="ignore", invalid="ignore"):
        logits = model.forward(x)
    if not np.all(np.isfinite(logits)):
        raise FloatingPointError("non-finite logits")
    return logits


def _check_finite(rep):
    if not (math.isfinite(rep.value) and np.all(np.isfinite(rep.grad_logits))):
        raise FloatingPointError(f"non-finite loss {rep.value}")


def train(cfg, datasets=None):
    """Run one experiment and return its :class:`RunResult`.

    ``datasets`` may pass a pre-built ``(train, test)`` pair; otherwise
    :func:`load_datasets` builds it from ``cfg``.
    """
    train_set, test_set = datasets if datasets is not None else load_datasets(cfg)
    model = MLP([train_set.dims, *cfg.hidden, train_set.num_classes], seed=cfg.seed)
    trainer = _TRAINERS[cfg.objective](cfg, model)
    class_names = train_set.metadata.get("label_names")
    if class_names is not None:
        class_names = [str(c) for c in class_names]

    per_epoch, iter_times = [], []
    iterations = 0
    cm = None
    for epoch in range(cfg.epochs):
        lr = lr_at(cfg.sgd_cfg, epoch)
        total, seen = 0.0, 0
        t_epoch = time.perf_counter()
        for x, y in data.batches(train_set, cfg.batch_plan, epoch):
            t0 = time.perf_counter()
            try:
                value = trainer.step(x, y, lr)
            except FloatingPointError as exc:
                partial = _result(cfg, per_epoch, cm, iter_times, iterations, trainer)
                raise TrainingDiverged(
                    f"{cfg.run_id}: diverged at epoch {epoch}, iteration {iterations}: {exc}",
                    partial=partial,
                ) from exc
            dt = time.perf_counter() - t0
            if epoch > 0 or cfg.epochs == 1:
                iter_times.append(dt)
            iterations += 1
            total += value * len(y)
            seen += len(y)
        wall = time.perf_counter() - t_epoch
        cm = evaluate(model, test_set, class_names)
        bacc = balanced_accuracy(cm)
        per_epoch.append({
            "epoch": epoch,
            "train_loss": total / seen,
            "test_bacc": bacc,
            "test_error": 1.0 - accuracy(cm),
            "lr": lr,
            "epoch_wall_time": wall,
        })
        log.debug("%s epoch %d loss %.4f bacc %.4f", cfg.run_id, epoch, total / seen, bacc)
    return _result(cfg, per_epoch, cm, iter_times, iterations, trainer)


def _result(cfg, per_epoch, cm, iter_times, iterations, trainer):
    return RunResult(
        run_id=cfg.run_id,
        objective=cfg.objective,
        dataset_label=cfg.dataset_label,
        final_bacc=per_epoch[-1]["test_bacc"] if per_epoch else math.nan,
        per_epoch=per_epoch,
        confusion=cm if cm is not None else ConfusionMatrix.zeros(2),
        timing={
            "mean_seconds_per_iteration": mean(iter_times) if iter_times else math.nan,
            "iterations": iterations,
            "iterations_timed": len(iter_times),
            "backward_passes": iterations * trainer.backward_per_iteration,
        },
        config_echo=cfg.to_dict(),
    )


def _require(cfg, objective):
    if cfg.objective != objective:
        raise ConfigurationError(f"expected objective {objective!r}, got {cfg.objective!r}")
    return train(cfg)


def train_erm(cfg):
    return _require(cfg, "erm")


def train_focal(cfg):
    return _require(cfg, "focal")


def train_cot(cfg):
    return _require(cfg, "cot")


def train_cce(cfg):
    return _require(cfg, "cce")


def gamma_sweep(base_cfg, gammas):
    """One CCE run per gamma, everything else (seeds included) held fixed."""
    gammas = list(gammas)
    bad = [g for g in gammas if not g < 0]
    if bad:
        raise ConfigurationError(f"gamma sweep needs negative values, got {bad}")
    datasets = load_datasets(replace(base_cfg, objective="erm"))
    return [
        train(replace(base_cfg, objective="cce",
                      loss_cfg=replace(base_cfg.loss_cfg, gamma=float(g))), datasets)
        for g in gammas
    ]


def _pivot(results, row_key):
    """``{row: {dataset_label: mean bacc}}`` preserving first-seen order."""
    table, cols = {}, []
    for r in results:
        row = row_key(r)
        if r.dataset_label not in cols:
            cols.append(r.dataset_label)
        table.setdefault(row, {}).setdefault(r.dataset_label, []).append(r.final_bacc)
    return table, cols


def _write_pivot(path, first_header, table, cols):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow([first_header, *cols])
        for row, cells in table.items():
            w.writerow([row, *(f"{mean(cells[c]):.6f}" if c in cells else "" for c in cols)])


def write_gamma_table(results, path):
    """Rows are gamma values, columns dataset variants, cells bACC."""
    table, cols = _pivot(results, lambda r: f"{r.config_echo['loss_cfg']['gamma']:g}")
    _write_pivot(path, "gamma", table, cols)


def report(results, out_dir):
    """Write per-run JSON, confusion and curve CSVs, and the comparison table.

    Returns the list of written paths.
    """
    if not results:
        raise ConfigurationError("nothing to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for r in results:
        p = out / f"{r.run_id}.json"
        p.write_text(r.to_json(), encoding="utf-8")
        written.append(p)
        p = out / f"{r.run_id}_confusion.csv"
        r.confusion.to_csv(p)
        written.append(p)
        p = out / f"{r.run_id}_curve.csv"
        with open(p, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["epoch", "test_error_percent"])
            for rec in r.per_epoch:
                w.writerow([rec["epoch"], f"{100 * rec['test_error']:.4f}"])
        written.append(p)
    table, cols = _pivot(results, lambda r: r.objective)
    p = out / "comparison.csv"
    _write_pivot(p, "objective", table, cols)
    written.append(p)
    return written


def load_results(directory):
    """Read back every RunResult JSON written by :func:`report`."""
    return [RunResult.from_json(p.read_text(encoding="utf-8"))
            for p in sorted(Path(directory).glob("*.json"))]
