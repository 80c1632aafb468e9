#!/usr/bin/env python3
"""Smoke test for the bdd_py extension module.

Build and stage the module first:

    cargo build --release -p bdd-py
    cp target/release/libbdd_py.so python/bdd_py.so

then run `python3 python/smoke_test.py`.
"""
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import bdd_py


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    # L-shaped boundary, first quadrant treated
    boundary = bdd_py.Boundary([(1, 0), (0, 0), (0, 1)], closed=False, treated_side="right")
    assert close(boundary.total_length(), 2.0, 1e-12)
    assert close(boundary.signed_distance(0.3, 0.4), 0.3, 1e-12)
    assert close(boundary.signed_distance(-0.2, 0.5), -0.2, 1e-12)
    assert boundary.is_treated(0.5, 0.0)  # boundary points are treated
    px, py, dist = boundary.closest_point(-1.0, -1.0)
    assert close(px, 0.0, 1e-12) and close(py, 0.0, 1e-12) and close(dist, math.sqrt(2), 1e-12)
    grid = boundary.discretize(5)
    assert len(grid) == 5 and grid[2] == (0.0, 0.0)

    # simulate a constant-effect DGP and re-estimate it
    dgp = """
boundary = l-shape
mu0 = 0.2 0.5 -0.5
mu1 = 0.9 0.5 -0.5
noise_sd = 0.35
density = uniform-box
n = 4000
seed = 7
"""
    y, x1, x2, truth = bdd_py.simulate(dgp)
    assert len(y) == 4000
    assert close(truth["bate"], 0.7, 1e-10)
    assert close(truth["lbate"], 0.7, 1e-10)

    frame = bdd_py.Frame(y, x1, x2, boundary, segments=2)
    assert len(frame) == 4000
    assert set(frame.s) == {1, 2}

    est = bdd_py.estimate_pooled(frame, spec=6, p=1, q=2, h=None)
    tau = est["tau_hat"][0]
    lo, hi = est["ci_rbc"][0]
    assert close(tau, 0.7, 0.15), f"pooled tau {tau}"
    assert lo <= 0.7 <= hi, f"rbc interval ({lo}, {hi})"
    assert est["n_treated"] > 0 and est["n_control"] > 0

    hband = bdd_py.h_mse_pooled(frame, p=1)
    assert 0 < hband <= 4

    res = bdd_py.estimate_curve(frame, boundary, method="location", grid=15, p=1, q=2, h=0.4, seed=3)
    taus = [t for t in res["tau_hat"] if t is not None]
    assert len(taus) >= 10
    assert all(close(t, 0.7, 0.35) for t in taus), taus
    assert res["band_crit"] >= 1.95
    assert close(res["wbate"], 0.7, 0.15), res["wbate"]

    print("bdd_py smoke test passed")


if __name__ == "__main__":
    main()
