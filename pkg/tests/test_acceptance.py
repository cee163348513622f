"""Exit criteria. Each test prints one PASS/FAIL line in the terminal summary."""

import json
import math
import statistics
import time
from dataclasses import replace

import numpy as np
import pytest

from ccelab import cli
from ccelab.data import generate_blobs
from ccelab.harness import RunResult, desk_config, train
from ccelab.imbalance import ImbalanceSpec, measure_ratio, plan_long_tailed, plan_step, subsample
from ccelab.losses import (
    LossConfig,
    balanced_complement_entropy,
    complement_cross_entropy,
    complement_entropy,
    cross_entropy,
    focal_loss,
    modulated_complement_entropy,
)
from ccelab.metrics import ConfusionMatrix, balanced_accuracy
from ccelab.tensor import OneHotBatch, ProbBatch, softmax

from conftest import central_diff, rel_error

SEEDS = range(5)
TREND_EPOCHS = 30

LOSSES = {
    "cross_entropy": lambda z, y, cfg: cross_entropy(softmax(z), y),
    "complement_entropy": lambda z, y, cfg: complement_entropy(softmax(z), y, cfg.epsilon),
    "balanced_complement_entropy": lambda z, y, cfg: balanced_complement_entropy(softmax(z), y, cfg),
    "modulated_complement_entropy": lambda z, y, cfg: modulated_complement_entropy(softmax(z), y, cfg),
    "complement_cross_entropy": lambda z, y, cfg: complement_cross_entropy(z, y, cfg),
    "focal_loss": lambda z, y, cfg: focal_loss(softmax(z), y, cfg),
}


def test_gradient_correctness():
    """Analytic logit gradients match central differences (h=1e-6) to rel err < 1e-5, 50 instances, < 10 s."""
    rng = np.random.default_rng(0)
    cfg = LossConfig(gamma=-1.0, focal_focus=2.0)
    start = time.perf_counter()
    worst = 0.0
    for i in range(50):
        k = (2, 5, 10)[i % 3]
        z = rng.uniform(-5, 5, size=(8, k))
        y = OneHotBatch(rng.integers(0, k, 8), k)
        for name, fn in LOSSES.items():
            err = rel_error(fn(z, y, cfg).grad_logits,
                            central_diff(lambda zz: fn(zz, y, cfg).value, z, h=1e-6))
            worst = max(worst, err)
            assert err < 1e-5, (name, k, err)
    elapsed = time.perf_counter() - start
    print(f"worst relative error {worst:.2e} in {elapsed:.2f}s")
    assert elapsed < 10


def test_analytic_loss_values():
    """CE of uniform = ln K, complement entropy of uniform incorrect = ln(K-1) (|err| < 1e-9), CCE example = 0.356641 (|err| < 1e-5)."""
    for k in (2, 3, 5, 10, 100):
        y = OneHotBatch([0, k - 1], k)
        assert abs(cross_entropy(softmax(np.zeros((2, k))), y).value - math.log(k)) < 1e-9
    for k in (3, 5, 10, 100):
        p_true = 0.3
        row = [p_true] + [(1 - p_true) / (k - 1)] * (k - 1)
        v = complement_entropy(ProbBatch.from_probs([row]), OneHotBatch([0], k)).value
        assert abs(v - math.log(k - 1)) < 1e-9
    pb = ProbBatch.from_probs([[0.5, 0.3, 0.2]])
    v = complement_cross_entropy(pb.logits, OneHotBatch([0], 3), LossConfig(gamma=-1)).value
    assert abs(v - 0.356641) < 1e-5


def test_entropy_bound():
    """Complement entropy lies in [0, ln(K-1)] on 10,000 random rows with no degenerate-rule violations."""
    rng = np.random.default_rng(1)
    violations = 0
    for i in range(10_000):
        k = int(rng.integers(2, 12))
        z = rng.normal(scale=rng.choice([0.5, 3.0, 20.0]), size=(1, k))
        g = int(rng.integers(0, k))
        if i % 10 == 0:
            z[0, g] += 60.0  # drives 1 - p_g below epsilon
        pb = softmax(z)
        rep = complement_entropy(pb, OneHotBatch([g], k))
        if not (0.0 <= rep.value <= math.log(k - 1) + 1e-12):
            violations += 1
        rest = 1.0 - pb.probs[0, g]
        if rest <= 1e-12 and (rep.value != 0.0 or np.any(rep.grad_logits)):
            violations += 1
    assert violations == 0


def test_balanced_accuracy_oracle():
    """bACC([[9,1],[4,6]]) = 0.75 exactly and is invariant to duplicating one class (|delta| < 1e-12)."""
    cm = ConfusionMatrix([[9, 1], [4, 6]])
    assert balanced_accuracy(cm) == 0.75
    dup = ConfusionMatrix([[18, 2], [4, 6]])
    assert abs(balanced_accuracy(dup) - balanced_accuracy(cm)) < 1e-12
    rng = np.random.default_rng(2)
    for _ in range(100):
        counts = rng.integers(0, 30, size=(5, 5)) + np.eye(5, dtype=int)
        c = int(rng.integers(0, 5))
        dup = counts.copy()
        dup[c] *= int(rng.integers(2, 10))
        assert abs(balanced_accuracy(ConfusionMatrix(dup)) - balanced_accuracy(ConfusionMatrix(counts))) < 1e-12


def test_imbalance_builders():
    """plan_long_tailed(5000,10,100) endpoints (5000, 50); realised ratio within 5% for ratio 10 and 100; counts non-increasing."""
    d = plan_long_tailed(5000, 10, 100)
    assert (d.counts[0], d.counts[-1]) == (5000, 50)
    balanced = generate_blobs(10, 5000, dims=2, seed=0)
    for ratio in (10, 100):
        for kind in ("long_tailed", "step"):
            out = subsample(balanced, ImbalanceSpec(kind, ratio, seed=3))
            assert abs(measure_ratio(out) - ratio) <= 0.05 * ratio
            counts = sorted(out.class_counts.tolist(), reverse=True)
            plan = (plan_long_tailed if kind == "long_tailed" else plan_step)(5000, 10, ratio)
            assert tuple(counts) == plan.counts
            assert all(a >= b for a, b in zip(plan.counts, plan.counts[1:]))


def test_structural_speed_claim():
    """COT does 2x the backward passes of CCE and is > 1.2x slower per iteration on identical configs (< 2 min)."""
    start = time.perf_counter()
    base = desk_config("cce", epochs=6, seed=0)
    cce = train(base)
    cot = train(replace(base, objective="cot"))
    assert cot.iterations == cce.iterations
    assert cot.backward_passes == 2 * cce.backward_passes
    ratio = cot.mean_seconds_per_iteration / cce.mean_seconds_per_iteration
    print(f"COT/CCE seconds per iteration: {ratio:.2f}")
    assert ratio > 1.2
    assert time.perf_counter() - start < 120


@pytest.fixture(scope="module")
def trend_runs():
    """Final bACC per seed for ERM and CCE at several gammas (blobs, K=10, dims=8, LT-100)."""
    start = time.perf_counter()
    out = {}
    for seed in SEEDS:
        out.setdefault("erm", []).append(
            train(desk_config("erm", epochs=TREND_EPOCHS, seed=seed)).final_bacc)
        for gamma in (-1.0, -5.0, -50.0):
            out.setdefault(gamma, []).append(
                train(desk_config("cce", epochs=TREND_EPOCHS, seed=seed, gamma=gamma)).final_bacc)
    out["elapsed"] = time.perf_counter() - start
    return out


def test_trend_cce_vs_erm(trend_runs):
    """Median final bACC over 5 seeds on blobs LT-100 (K=10, dims=8, 500/class, MLP 2x64, 30 epochs): CCE >= ERM, < 5 min."""
    erm = statistics.median(trend_runs["erm"])
    cce = statistics.median(trend_runs[-1.0])
    print(f"median bACC ERM {erm:.4f} CCE {cce:.4f}; per-seed ERM {trend_runs['erm']} CCE {trend_runs[-1.0]}")
    assert trend_runs["elapsed"] < 300
    assert cce >= erm


def test_trend_gamma_sweep(trend_runs):
    """Same setup, gamma in {-1, -5, -50}: median bACC(gamma=-1) >= median bACC(gamma=-50)."""
    med = {g: statistics.median(trend_runs[g]) for g in (-1.0, -5.0, -50.0)}
    print(f"median bACC by gamma {med}")
    assert med[-1.0] >= med[-50.0]


@pytest.mark.parametrize("objective", ["erm", "focal", "cot", "cce"])
def test_determinism(objective, tmp_path, capsys):
    """Running the train verb twice with identical config and seed yields byte-identical RunResult JSON (timing excluded)."""
    argv = ["train", "--objective", objective, "--epochs", "3", "--per-class", "60",
            "--imbalance", "lt", "--ratio", "10", "--seed", "11", "--out", str(tmp_path)]
    texts = []
    for _ in range(2):
        assert cli.main(argv) == 0
        run_id = json.loads(capsys.readouterr().out)["run_id"]
        texts.append((tmp_path / f"{run_id}.json").read_text())
    a, b = (RunResult.from_json(t).to_json(drop_timing=True) for t in texts)
    assert a.encode() == b.encode()


def test_focal_reduction():
    """A focal_focus=0 run is bit-identical to an ERM run under shared seeds."""
    cfg = desk_config("erm", epochs=8, seed=4)
    erm = train(cfg)
    focal = train(replace(cfg, objective="focal", loss_cfg=LossConfig(focal_focus=0.0)))
    strip = lambda r: json.dumps([{k: v for k, v in e.items() if k != "epoch_wall_time"}
                                  for e in r.per_epoch])
    assert strip(erm) == strip(focal)
    assert erm.confusion == focal.confusion and erm.final_bacc == focal.final_bacc
