"""Rigid transforms, Euler angles and the translations used to normalize clouds.

Point clouds are plain ``(N, 3)`` float64 arrays. Functions never modify their
inputs in place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import RegistrationError

ORTHO_TOL = 1e-9


class EulerAngles(NamedTuple):
    """Rotation angles about x, y and z, in degrees."""

    alpha: float
    beta: float
    gamma: float


def as_points(pc, *, allow_empty=False) -> np.ndarray:
    """Validate and return ``pc`` as a float64 ``(N, 3)`` array."""
    pts = np.asarray(pc, dtype=np.float64)
    if pts.ndim == 1 and pts.size == 3:
        pts = pts.reshape(1, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise RegistrationError(f"expected an (N, 3) point array, got shape {pts.shape}")
    if not allow_empty and len(pts) == 0:
        raise RegistrationError("empty point cloud")
    if not np.all(np.isfinite(pts)):
        raise RegistrationError("point cloud contains non-finite coordinates")
    return pts


def rot_x(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_matrix(angles) -> np.ndarray:
    """Rotation matrix for extrinsic x, then y, then z rotations.

    ``R = Rz(gamma) @ Ry(beta) @ Rx(alpha)``; angles in degrees.
    """
    alpha, beta, gamma = (float(a) for a in angles)
    if not np.all(np.isfinite([alpha, beta, gamma])):
        raise RegistrationError("Euler angles must be finite")
    return rot_z(gamma) @ rot_y(beta) @ rot_x(alpha)


def euler_to_matrices(angles: np.ndarray) -> np.ndarray:
    """Vectorized :func:`euler_to_matrix` for an ``(K, 3)`` array of angles."""
    a = np.radians(np.asarray(angles, dtype=np.float64).reshape(-1, 3))
    ca, sa = np.cos(a[:, 0]), np.sin(a[:, 0])
    cb, sb = np.cos(a[:, 1]), np.sin(a[:, 1])
    cg, sg = np.cos(a[:, 2]), np.sin(a[:, 2])
    out = np.empty((len(a), 3, 3))
    out[:, 0, 0] = cg * cb
    out[:, 0, 1] = cg * sb * sa - sg * ca
    out[:, 0, 2] = cg * sb * ca + sg * sa
    out[:, 1, 0] = sg * cb
    out[:, 1, 1] = sg * sb * sa + cg * ca
    out[:, 1, 2] = sg * sb * ca - cg * sa
    out[:, 2, 0] = -sb
    out[:, 2, 1] = cb * sa
    out[:, 2, 2] = cb * ca
    return out


def is_rotation(R, tol: float = ORTHO_TOL) -> bool:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return bool(
        np.max(np.abs(R.T @ R - np.eye(3))) <= tol and abs(np.linalg.det(R) - 1.0) <= tol
    )


def rotation_angle_deg(R) -> float:
    """Geodesic angle of a rotation matrix, in degrees."""
    cos = (np.trace(R) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))


@dataclass(frozen=True)
class RigidTransform:
    """Rotation plus translation, mapping ``p`` to ``R @ p + t``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=np.float64)
        t = np.array(self.translation, dtype=np.float64).reshape(-1)
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise RegistrationError("translation must be a finite 3-vector")
        if not is_rotation(R):
            raise RegistrationError("rotation is not a proper orthonormal matrix")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls()

    @classmethod
    def from_matrix(cls, matrix) -> RigidTransform:
        """Build from a 4x4 homogeneous matrix (or its 16 row-major entries)."""
        M = np.asarray(matrix, dtype=np.float64).reshape(4, 4)
        if not np.allclose(M[3], [0.0, 0.0, 0.0, 1.0], atol=1e-12):
            raise RegistrationError("last row of a rigid 4x4 matrix must be [0, 0, 0, 1]")
        return cls(M[:3, :3], M[:3, 3])

    def as_matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def inverse(self) -> RigidTransform:
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def compose(self, other: RigidTransform) -> RigidTransform:
        """``self @ other``: apply ``other`` first, then ``self``."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    __matmul__ = compose

    def apply(self, pc) -> np.ndarray:
        return apply_transform(pc, self)


def center_of_mass_shift(pc) -> np.ndarray:
    """Mean of the points; subtracting it centers the cloud at the origin."""
    return as_points(pc).mean(axis=0)


def positive_shift(pc) -> np.ndarray:
    """Negated per-axis minima; adding it moves the bounding box corner to the origin."""
    return -as_points(pc).min(axis=0)


def apply_transform(pc, T: RigidTransform) -> np.ndarray:
    pts = as_points(pc, allow_empty=True)
    return pts @ T.rotation.T + T.translation
