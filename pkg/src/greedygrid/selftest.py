"""Quick end-to-end checks runnable from the command line."""

from __future__ import annotations

import time

import numpy as np

from .metrics import rre, rte
from .rotgrid import build_grid
from .solver import register
from .synthetic import grid_trial
from .voxel import VoxelConfig
from .xcorr import xcorr_direct, xcorr_fft


def fft_oracle_check(rng, pairs: int = 30, tol: float = 1e-6) -> float:
    """Worst relative error of the FFT engine against direct summation on random volumes."""
    worst = 0.0
    for _ in range(pairs):
        src_dims = rng.integers(1, 9, size=3)
        tgt_dims = np.array([rng.integers(1, d + 1) for d in src_dims])
        src = rng.choice([5.0, -1.0], size=src_dims)
        tgt = rng.choice([5.0, -1.0], size=tgt_dims)
        ref = xcorr_direct(src, tgt).scores
        got = xcorr_fft(src, tgt).scores
        scale = max(np.max(np.abs(ref)), 1.0)
        worst = max(worst, float(np.max(np.abs(got - ref)) / scale))
    return worst


def run_selftest(seed: int = 0, out=print) -> bool:
    rng = np.random.default_rng(seed)
    ok = True

    t0 = time.perf_counter()
    worst = fft_oracle_check(rng)
    passed = worst <= 1e-6
    ok &= passed
    out(f"[{'PASS' if passed else 'FAIL'}] fft vs direct: worst relative error {worst:.2e} ({time.perf_counter() - t0:.2f}s)")

    grid = build_grid(30.0, 15.0)
    cfg = VoxelConfig(0.06)
    for k in range(3):
        t0 = time.perf_counter()
        trial = grid_trial(rng, grid, 0.5, 2000)
        res = register(trial.source, trial.target, grid, cfg)
        e_r = rre(trial.truth.rotation, res.coarse.rotation)
        e_t = rte(trial.truth.translation, res.coarse.translation)
        passed = e_r < 1e-4 and e_t < 1e-6
        ok &= passed
        out(
            f"[{'PASS' if passed else 'FAIL'}] grid recovery {k}: RRE {e_r:.2e} deg, "
            f"RTE {e_t:.2e} m ({time.perf_counter() - t0:.2f}s)"
        )
    return ok
