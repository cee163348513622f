import math

import numpy as np
import pytest


def central_diff(f, z, h=1e-6):
    """Central finite-difference gradient of scalar ``f`` at array ``z``."""
    z = np.array(z, dtype=np.float64)
    g = np.zeros_like(z)
    for idx in np.ndindex(z.shape):
        zp, zm = z.copy(), z.copy()
        zp[idx] += h
        zm[idx] -= h
        g[idx] = (f(zp) - f(zm)) / (2 * h)
    return g


def rel_error(a, b, floor=1e-8):
    """Max abs difference scaled by the larger gradient norm (floored)."""
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), floor)
    return float(np.max(np.abs(a - b)) / scale)


def scalar_complement_entropy(prob_rows, truths):
    """Reference complement entropy by explicit loops over plain floats."""
    total = 0.0
    for row, g in zip(prob_rows, truths):
        rest = 1.0 - row[g]
        h = 0.0
        for j, p in enumerate(row):
            if j == g or p == 0.0:
                continue
            q = p / rest
            h -= q * math.log(q)
        total += h
    return total / len(prob_rows)


def scalar_softmax(row):
    m = max(row)
    e = [math.exp(v - m) for v in row]
    s = sum(e)
    return [v / s for v in e]


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_acceptance_lines = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.module.__name__.endswith("test_acceptance") and rep.when == "call":
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        if hasattr(item, "callspec"):
            doc += f" [{item.callspec.id}]"
        _acceptance_lines.append(f"[{'PASS' if rep.passed else 'FAIL'}] {doc}")


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
