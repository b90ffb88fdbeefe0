"""Candidate rotations sampled on a uniform Euler-angle grid."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .geometry import euler_to_matrices, rotation_angle_deg


def axis_samples(range_deg: float, step_deg: float) -> np.ndarray:
    """Samples ``-range, -range + step, ...`` covering the closed interval ``[-range, range]``."""
    if step_deg <= 0:
        raise ValueError(f"angle step must be positive, got {step_deg}")
    if range_deg < 0:
        raise ValueError(f"angle range must be non-negative, got {range_deg}")
    # small slack so e.g. 2*90/15 does not floor to 11.999...
    k = math.floor(2.0 * range_deg / step_deg + 1e-9) + 1
    return -range_deg + step_deg * np.arange(k, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class RotationGrid:
    """Cartesian product of per-axis Euler samples and the matching matrices.

    Candidates are ordered lexicographically in (alpha, beta, gamma), with
    gamma varying fastest. Rotations repeated through gimbal coincidences
    are kept.
    """

    alphas: np.ndarray
    betas: np.ndarray
    gammas: np.ndarray
    range_deg: float | None = None
    step_deg: float | None = None

    def __post_init__(self):
        for name in ("alphas", "betas", "gammas"):
            arr = np.array(getattr(self, name), dtype=np.float64).reshape(-1)
            if arr.size == 0:
                raise ValueError(f"{name} must contain at least one sample")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        angles = np.array(list(itertools.product(self.alphas, self.betas, self.gammas)))
        matrices = euler_to_matrices(angles)
        angles.setflags(write=False)
        matrices.setflags(write=False)
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "matrices", matrices)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (len(self.alphas), len(self.betas), len(self.gammas))

    def __len__(self) -> int:
        return len(self.angles)

    def __getitem__(self, i):
        return self.angles[i], self.matrices[i]

    def index_of(self, ia: int, ib: int, ig: int) -> int:
        _, nb, ng = self.shape
        return (ia * nb + ib) * ng + ig


def build_grid(range_deg: float = 90.0, step_deg: float = 15.0) -> RotationGrid:
    samples = axis_samples(range_deg, step_deg)
    return RotationGrid(samples, samples, samples, range_deg=range_deg, step_deg=step_deg)


def covering_bound_deg(grid: RotationGrid, mode: str = "adjacent") -> float:
    """Half the largest geodesic angle between grid rotations.

    ``mode="adjacent"`` only considers pairs of candidates whose Euler indices
    differ by one step along a single axis, which gives the usual
    discretization bound (7.5 degrees for a 15 degree step).
    ``mode="all_pairs"`` maximizes over every pair of candidates.
    """
    if len(grid) < 2:
        raise ValueError("bound undefined for a grid with fewer than two rotations")
    R = grid.matrices
    if mode == "all_pairs":
        best = 0.0
        for i in range(len(R) - 1):
            traces = np.einsum("ji,kji->k", R[i], R[i + 1 :])
            cos = np.clip((traces - 1.0) / 2.0, -1.0, 1.0)
            best = max(best, float(np.degrees(np.arccos(cos.min()))))
        return best / 2.0
    if mode != "adjacent":
        raise ValueError(f"unknown mode {mode!r}")

    Rg = R.reshape(*grid.shape, 3, 3)
    best = 0.0
    for axis in range(3):
        if grid.shape[axis] < 2:
            continue
        lo = np.take(Rg, np.arange(grid.shape[axis] - 1), axis=axis).reshape(-1, 3, 3)
        hi = np.take(Rg, np.arange(1, grid.shape[axis]), axis=axis).reshape(-1, 3, 3)
        traces = np.einsum("kji,kji->k", lo, hi)
        cos = np.clip((traces - 1.0) / 2.0, -1.0, 1.0)
        best = max(best, float(np.degrees(np.arccos(cos.min()))))
    return best / 2.0


def nearest_candidate(grid: RotationGrid, R) -> tuple[int, float]:
    """Index of the candidate closest to ``R`` and its geodesic distance in degrees."""
    traces = np.einsum("ji,kji->k", np.asarray(R), grid.matrices)
    i = int(np.argmax(traces))
    return i, rotation_angle_deg(grid.matrices[i].T @ R)
