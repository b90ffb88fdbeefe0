"""Greedy grid search: every candidate rotation, best translation by correlation.

For each candidate rotation ``R_i`` the centered source is rotated, shifted
into the positive octant and voxelized, then correlated against the target
volume. The single best (rotation, cell) over all candidates gives the coarse
transform::

    R = R_i*
    t = -R @ center(source) + posit(R_i* source) + t_est - posit(target)
"""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, RegistrationError, ResourceBudgetError
from .geometry import RigidTransform, as_points, center_of_mass_shift, positive_shift
from .rotgrid import RotationGrid, covering_bound_deg
from .voxel import (
    VoxelConfig,
    VoxelVolume,
    central_voxel,
    compute_padding,
    pad_volume,
    voxelize,
)
from .xcorr import CorrelationVolume, FFTCorrelator, xcorr_direct

log = logging.getLogger(__name__)

DEFAULT_MAX_CELLS = 512**3


@dataclass(frozen=True)
class PeakResult:
    rotation_index: int
    cell: tuple[int, int, int]
    score: float

    def key(self):
        # larger is better: highest score, then lowest rotation index, then lowest cell
        return (self.score, -self.rotation_index, tuple(-c for c in self.cell))


def better_peak(a: PeakResult | None, b: PeakResult | None) -> PeakResult | None:
    """Associative, commutative max under the tie-break order."""
    if a is None:
        return b
    if b is None:
        return a
    return a if a.key() >= b.key() else b


def volume_peak(vol: CorrelationVolume) -> PeakResult:
    # argmax returns the first maximum in C order, i.e. the lexicographically lowest cell
    flat = int(np.argmax(vol.scores))
    cell = tuple(int(c) for c in np.unravel_index(flat, vol.scores.shape))
    return PeakResult(vol.rotation_index, cell, float(vol.scores.flat[flat]))


def global_peak(volumes) -> PeakResult:
    best = None
    for vol in volumes:
        best = better_peak(best, volume_peak(vol))
    if best is None:
        raise ValueError("no correlation volumes given")
    return best


def estimate_translation(peak: PeakResult, target_vol: VoxelVolume, padding, resolution_m):
    """Translation that moves the target's central cell onto the source cell at the peak.

    At correlation offset ``o`` target cell ``k`` overlays unpadded source cell
    ``o + k - pad_low``. Both frames are the positive-shifted ones.
    """
    center = np.array(central_voxel(target_vol.unpadded_dims), dtype=np.float64)
    pad_low = np.array(padding[0::2], dtype=np.float64)
    source_cell = np.array(peak.cell, dtype=np.float64) + center - pad_low
    return ((center + 0.5) - (source_cell + 0.5)) * resolution_m


@dataclass
class RegistrationResult:
    coarse: RigidTransform
    peak: PeakResult
    refined: RigidTransform | None = None
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class _Candidate:
    peak: PeakResult
    source_shift: np.ndarray
    padding: tuple


def _check_geometry(pts: np.ndarray, name: str) -> None:
    if len(pts) > 1 and np.all(pts == pts[0]):
        raise DegenerateGeometryError(f"degenerate geometry: all {name} points coincide")


def _rotated_extent_bound(centered: np.ndarray, matrices: np.ndarray) -> np.ndarray:
    """Per-axis extent bound of each rotated cloud, from its rotated bounding box corners."""
    lo, hi = centered.min(axis=0), centered.max(axis=0)
    corners = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    rc = np.einsum("kij,cj->kci", matrices, corners)
    return rc.max(axis=1) - rc.min(axis=1)


def check_budget(source, target, grid: RotationGrid, cfg: VoxelConfig, max_cells: int):
    """Raise :class:`ResourceBudgetError` if some padded volume would exceed ``max_cells``."""
    src = as_points(source)
    tgt = as_points(target)
    ext = _rotated_extent_bound(src - src.mean(axis=0), grid.matrices)
    t_ext = tgt.max(axis=0) - tgt.min(axis=0)
    total = ext + t_ext[None, :]
    cells = float(np.max(np.prod(total / cfg.resolution_m + 2.0, axis=1)))
    if cells > max_cells:
        suggested = cfg.resolution_m * (cells / max_cells) ** (1.0 / 3.0) * 1.05
        raise ResourceBudgetError(
            f"padded volume of ~{cells:.3g} cells exceeds the cap of {max_cells} cells; "
            f"try a voxel resolution of at least {suggested:.4g} m",
            suggested_resolution=suggested,
        )
    return cells


def default_workers() -> int:
    env = os.environ.get("GREEDYGRID_THREADS")
    if env:
        return max(1, int(env))
    return 1


def register(
    source,
    target,
    grid: RotationGrid,
    cfg: VoxelConfig,
    *,
    engine: str = "fft",
    workers: int | None = None,
    max_cells: int = DEFAULT_MAX_CELLS,
    padding_fn=compute_padding,
) -> RegistrationResult:
    """Coarse rigid transform aligning ``source`` onto ``target``.

    Parameters
    ----------
    source, target : array_like, shape (N, 3) and (M, 3)
        Point clouds in meters.
    grid : RotationGrid
        Candidate rotations.
    cfg : VoxelConfig
        Voxel resolution and the occupied/empty cell values.
    engine : {"fft", "direct"}
        Correlation engine.
    workers : int, optional
        Threads for the sweep over rotations. Defaults to ``GREEDYGRID_THREADS``
        or 1. The result does not depend on this value.
    max_cells : int
        Cap on the cell count of any padded source volume.
    padding_fn : callable
        ``(source_dims, target_dims) -> 6 ints``. Any split of ``target - 1``
        cells per axis gives the same transform.
    """
    t0 = time.perf_counter()
    src = as_points(source)
    tgt = as_points(target)
    _check_geometry(src, "source")
    _check_geometry(tgt, "target")
    if engine not in ("fft", "direct"):
        raise ValueError(f"unknown engine {engine!r}")
    check_budget(src, tgt, grid, cfg, max_cells)
    workers = workers or default_workers()

    center = center_of_mass_shift(src)
    centered = src - center
    target_shift = positive_shift(tgt)
    target_vol = voxelize(tgt + target_shift, cfg)
    correlator = FFTCorrelator(target_vol) if engine == "fft" else None

    def run(i: int) -> _Candidate:
        rotated = centered @ grid.matrices[i].T
        shift = positive_shift(rotated)
        vol = voxelize(rotated + shift, cfg)
        padding = tuple(padding_fn(vol.dims, target_vol.dims))
        padded = pad_volume(vol, padding)
        if correlator is not None:
            cc = correlator.correlate(padded, i)
        else:
            cc = xcorr_direct(padded, target_vol, i)
        return _Candidate(volume_peak(cc), shift, padding)

    def sweep(indices) -> _Candidate | None:
        best = None
        for i in indices:
            cand = run(i)
            if best is None or cand.peak.key() > best.peak.key():
                best = cand
        return best

    t1 = time.perf_counter()
    n = len(grid)
    if workers == 1:
        partials = [sweep(range(n))]
    else:
        chunks = [range(w, n, workers) for w in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(sweep, chunks))
    best = None
    for cand in partials:
        if cand is None:
            continue
        if best is None or cand.peak.key() > best.peak.key():
            best = cand
    t2 = time.perf_counter()

    peak = best.peak
    R = grid.matrices[peak.rotation_index]
    t_est = estimate_translation(peak, target_vol, best.padding, cfg.resolution_m)
    t = -R @ center + best.source_shift + t_est - target_shift
    coarse = RigidTransform(R, t)
    diagnostics = {
        "candidates": n,
        "engine": engine,
        "workers": workers,
        "target_dims": target_vol.dims,
        "padding": best.padding,
        "source_center": center,
        "source_shift": best.source_shift,
        "target_shift": target_shift,
        "t_est": t_est,
        "euler_deg": tuple(float(a) for a in grid.angles[peak.rotation_index]),
        "timings": {"preprocess": t1 - t0, "search": t2 - t1, "total": t2 - t0},
    }
    log.debug("peak %s after %.3fs", peak, t2 - t0)
    return RegistrationResult(coarse=coarse, peak=peak, diagnostics=diagnostics)


def coarse_bounds(grid: RotationGrid, resolution_m: float) -> tuple[float, float]:
    """Rotation (degrees) and translation (meters) discretization bounds."""
    return covering_bound_deg(grid), resolution_m * math.sqrt(3.0) / 2.0
