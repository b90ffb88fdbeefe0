"""Synthetic clouds and registration trials with known ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import RigidTransform, euler_to_matrix
from .rotgrid import RotationGrid


def box_surface(rng, n, center, size) -> np.ndarray:
    """``n`` points uniformly on the surface of an axis-aligned box."""
    size = np.asarray(size, dtype=np.float64)
    areas = np.array([size[1] * size[2], size[0] * size[2], size[0] * size[1]] * 2)
    face = rng.choice(6, size=n, p=areas / areas.sum())
    pts = rng.uniform(-0.5, 0.5, size=(n, 3))
    axis = face % 3
    pts[np.arange(n), axis] = np.where(face < 3, -0.5, 0.5)
    return pts * size + np.asarray(center)


def sphere_surface(rng, n, center=(0.0, 0.0, 0.0), radius=1.0) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.asarray(center) + radius * v


def asymmetric_object(rng, n: int = 3000, scale: float = 1.0) -> np.ndarray:
    """An L-shaped cluster of boxes plus a ball, about ``scale`` m across, centered at the origin.

    Has no rotational symmetry, so the best rotation is unambiguous.
    """
    parts = [
        box_surface(rng, n * 4 // 10, (0.0, 0.0, 0.0), (0.8, 0.3, 0.25)),
        box_surface(rng, n * 25 // 100, (-0.25, 0.3, 0.0), (0.3, 0.4, 0.2)),
        box_surface(rng, n * 15 // 100, (0.3, 0.0, 0.25), (0.15, 0.15, 0.3)),
    ]
    parts.append(sphere_surface(rng, n - sum(len(p) for p in parts), (0.1, 0.25, -0.2), 0.12))
    pts = np.vstack(parts)
    return (pts - pts.mean(axis=0)) * scale


@dataclass
class Trial:
    source: np.ndarray
    target: np.ndarray
    truth: RigidTransform
    """Maps ``source`` onto ``target``."""
    euler_deg: np.ndarray


def make_trial(target, truth: RigidTransform, euler_deg=None) -> Trial:
    """Source is ``inverse(truth)`` applied to the target, so ``truth`` registers it exactly."""
    target = np.asarray(target, dtype=np.float64)
    source = (target - truth.translation) @ truth.rotation
    return Trial(source, target, truth, None if euler_deg is None else np.asarray(euler_deg))


def random_trial(rng, range_deg: float, max_offset_m: float, n: int = 3000, scale: float = 1.0) -> Trial:
    """Full-overlap trial with Euler angles uniform in ``[-range, range]``."""
    angles = rng.uniform(-range_deg, range_deg, size=3)
    offset = rng.uniform(-max_offset_m, max_offset_m, size=3)
    return make_trial(asymmetric_object(rng, n, scale), RigidTransform(euler_to_matrix(angles), offset), angles)


def grid_trial(rng, grid: RotationGrid, max_offset_m: float, n: int = 3000, scale: float = 1.0) -> Trial:
    """Trial whose true rotation is a grid candidate."""
    i = int(rng.integers(len(grid)))
    offset = rng.uniform(-max_offset_m, max_offset_m, size=3)
    return make_trial(asymmetric_object(rng, n, scale), RigidTransform(grid.matrices[i], offset), grid.angles[i])
