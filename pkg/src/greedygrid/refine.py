"""ICP refinement of a coarse registration."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import NoOverlapError
from .geometry import RigidTransform, apply_transform, as_points

VARIANTS = ("point_to_point", "point_to_plane")


@dataclass(frozen=True)
class IcpConfig:
    max_correspondence_dist_m: float
    max_iterations: int = 50
    convergence_eps: float = 1e-6
    variant: str = "point_to_point"
    normal_neighbors: int = 16

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.max_correspondence_dist_m > 0:
            raise ValueError("correspondence gate must be positive")
        if not self.convergence_eps > 0:
            raise ValueError("convergence_eps must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown ICP variant {self.variant!r}")

    @classmethod
    def for_resolution(cls, resolution_m: float, **kwargs) -> IcpConfig:
        """Config gating correspondences at twice the voxel resolution."""
        return cls(max_correspondence_dist_m=2.0 * resolution_m, **kwargs)


@dataclass
class IcpResult:
    transform: RigidTransform
    converged: bool
    iterations: int
    mse_history: list = field(default_factory=list)
    fitness: float = 0.0


def kabsch(source, target, weights=None) -> RigidTransform:
    """Least-squares rigid transform mapping ``source`` points onto paired ``target`` points."""
    P = np.asarray(source, dtype=np.float64)
    Q = np.asarray(target, dtype=np.float64)
    if P.shape != Q.shape:
        raise ValueError("source and target must be paired arrays of equal shape")
    w = np.ones(len(P)) if weights is None else np.asarray(weights, dtype=np.float64)
    w = w / w.sum()
    mp = w @ P
    mq = w @ Q
    H = (P - mp).T @ ((Q - mq) * w[:, None])
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    D = np.diag([1.0, 1.0, d if d != 0 else 1.0])
    R = Vt.T @ D @ U.T
    return RigidTransform(R, mq - R @ mp)


def estimate_normals(points: np.ndarray, k: int = 16, tree: cKDTree | None = None) -> np.ndarray:
    """Unit normals from the smallest principal axis of each k-neighborhood."""
    tree = tree or cKDTree(points)
    k = min(k, len(points))
    _, nbr = tree.query(points, k=k)
    nbr = np.asarray(nbr).reshape(len(points), k)
    local = points[nbr] - points[nbr].mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", local, local)
    _, vecs = np.linalg.eigh(cov)
    return vecs[:, :, 0]


def _small_rotation(omega: np.ndarray) -> np.ndarray:
    theta = np.linalg.norm(omega)
    if theta < 1e-15:
        return np.eye(3)
    k = omega / theta
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def _point_to_plane_step(P, Q, N) -> RigidTransform:
    # linearized: minimize sum(((I + [w]x) p + t - q) . n)^2 over (w, t)
    A = np.hstack([np.cross(P, N), N])
    b = np.einsum("ij,ij->i", Q - P, N)
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    return RigidTransform(_small_rotation(x[:3]), x[3:])


def icp_refine(source, target, init: RigidTransform, cfg: IcpConfig) -> IcpResult:
    """Refine ``init`` so that ``init`` applied to ``source`` hugs ``target``.

    Correspondences are nearest target neighbors within the gate. The mean
    squared gated distance never increases across the reported iterations:
    an update that would raise it is discarded and the run stops.
    """
    src = as_points(source)
    tgt = as_points(target)
    tree = cKDTree(tgt)
    normals = estimate_normals(tgt, cfg.normal_neighbors, tree) if cfg.variant == "point_to_plane" else None
    gate = cfg.max_correspondence_dist_m

    def correspond(T):
        moved = apply_transform(src, T)
        dist, idx = tree.query(moved, distance_upper_bound=gate)
        mask = np.isfinite(dist)
        return moved, dist, idx, mask

    current = init
    moved, dist, idx, mask = correspond(current)
    if not mask.any():
        raise NoOverlapError("no overlap at initialization")
    mse = float(np.mean(dist[mask] ** 2))
    history = [mse]
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        P, Q = moved[mask], tgt[idx[mask]]
        if cfg.variant == "point_to_point" or len(P) < 6:
            step = kabsch(P, Q)
        else:
            step = _point_to_plane_step(P, Q, normals[idx[mask]])
        candidate = step @ current
        c_moved, c_dist, c_idx, c_mask = correspond(candidate)
        if not c_mask.any():
            break
        c_mse = float(np.mean(c_dist[c_mask] ** 2))
        if c_mse > mse:
            # a changed gated set can raise the mean; keep the last good transform
            converged = True
            break
        current, moved, dist, idx, mask = candidate, c_moved, c_dist, c_idx, c_mask
        change = mse - c_mse
        mse = c_mse
        history.append(mse)
        if change <= cfg.convergence_eps * max(history[-2], np.finfo(float).tiny):
            converged = True
            break
    fitness = float(mask.mean())
    return IcpResult(current, converged, iterations, history, fitness)
