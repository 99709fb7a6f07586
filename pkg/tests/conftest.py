"""Shared fixtures: random problem samplers and the three reference runs.

The reference runs are session-scoped because the acceptance checks slice
several properties out of the same trajectory; each records the wall time
of the whole build-integrate-report path.
"""

import json
import time

import numpy as np
import pytest

from regulata import scenarios


def random_generator(rng, n):
    """Ascending coefficients of an order-n marginally stable generator:
    distinct imaginary pairs (0.5 to 5 rad/s, separated by at least 0.3)
    plus a bias mode when n is odd."""
    n_pairs = n // 2
    while True:
        omegas = np.sort(rng.uniform(0.5, 5.0, size=n_pairs))
        if n_pairs < 2 or float(np.min(np.diff(omegas))) >= 0.3:
            break
    poly = np.array([1.0])
    for w in omegas:
        poly = np.convolve(poly, np.array([w * w, 0.0, 1.0]))
    if n % 2:
        poly = np.convolve(poly, np.array([0.0, 1.0]))
    return poly[:-1]


def random_filter(rng, q):
    """Ascending coefficients of a Hurwitz polynomial of degree q with real
    roots drawn from [-2, -0.5]."""
    poly = np.array([1.0])
    for r in rng.uniform(0.5, 2.0, size=q):
        poly = np.convolve(poly, np.array([r, 1.0]))
    return poly[:-1]


def _reference_run(kind, **overrides):
    cfg = scenarios.parse_config({"scenario": kind, **overrides})
    started = time.perf_counter()
    traj, report = scenarios.run_scenario(cfg)
    wall = time.perf_counter() - started
    return {"cfg": cfg, "traj": traj, "report": report, "wall": wall}


@pytest.fixture(scope="session")
def frequency_run():
    return _reference_run("frequency-estimation")


@pytest.fixture(scope="session")
def lorenz_run():
    return _reference_run("regulation-lorenz")


@pytest.fixture(scope="session")
def suspension_run():
    return _reference_run("suspension-feedforward")


@pytest.fixture
def write_config(tmp_path):
    def _write(data, name="scenario.cfg"):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return str(path)

    return _write
