"""Partial-view registration benchmarks built from complete scans.

Each scan is floor-aligned, surrounded by icosahedron viewpoints, and cut into
fragments with hidden point removal. Fragment pairs with enough overlap
become registration pairs after a random rigid perturbation of the source.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .geometry import RigidTransform, apply_transform, as_points, euler_to_matrix
from .io import read_point_cloud, write_json, write_point_cloud

log = logging.getLogger(__name__)

MAX_ANGLE_DEG = 45.0
MAX_OFFSET_M = 0.5


@dataclass(frozen=True)
class Viewpoint:
    index: int
    position: np.ndarray


def floor_align(pc) -> np.ndarray:
    """Translate so the bounding box minimum sits at the origin (y = 0 is the floor)."""
    pts = as_points(pc)
    return pts - pts.min(axis=0)


def icosahedron_vertices() -> np.ndarray:
    """The 12 unit-norm vertices of a regular icosahedron in canonical orientation."""
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = []
    for a, b in itertools.product((-1.0, 1.0), repeat=2):
        verts += [(0.0, a, b * phi), (a, b * phi, 0.0), (b * phi, 0.0, a)]
    v = np.array(verts)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def icosahedron_viewpoints(center, radius_m: float = 1.5) -> list[Viewpoint]:
    if not radius_m > 0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, dtype=np.float64).reshape(3)
    return [Viewpoint(i, center + radius_m * v) for i, v in enumerate(icosahedron_vertices())]


def drop_below_floor(viewpoints) -> list[Viewpoint]:
    kept = [vp for vp in viewpoints if vp.position[1] >= 0.0]
    if not kept:
        raise ValueError("no usable viewpoints")
    return kept


def _hull_vertices(points: np.ndarray, tol: float) -> np.ndarray:
    """Indices of convex hull vertices, handling flat (collinear/coplanar) sets."""
    centered = points - points.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    rank = int(np.sum(s > tol * s[0])) if s[0] > 0 else 0
    if rank == 0:
        return np.arange(len(points))
    if rank == 1:
        proj = centered @ vt[0]
        return np.unique([int(np.argmin(proj)), int(np.argmax(proj))])
    coords = centered @ vt[:rank].T
    return ConvexHull(coords).vertices


def hidden_point_removal(pc, viewpoint, radius_factor: float = 10.0) -> np.ndarray:
    """Indices of points visible from ``viewpoint``, in ascending order.

    Points are spherically flipped about the viewpoint with radius
    ``radius_factor * max distance``; a point is visible when its flipped
    image is a vertex of the convex hull of the flipped set plus the viewpoint.
    """
    pts = as_points(pc)
    vp = np.asarray(viewpoint, dtype=np.float64).reshape(3)
    rel = pts - vp
    norm = np.linalg.norm(rel, axis=1)
    if np.any(norm == 0.0):
        raise ValueError("a point coincides with the viewpoint")
    flip_radius = radius_factor * norm.max()
    flipped = rel + 2.0 * (flip_radius - norm)[:, None] * rel / norm[:, None]
    cloud = np.vstack([flipped, np.zeros((1, 3))])
    try:
        verts = _hull_vertices(cloud, 1e-10)
    except QhullError:
        warnings.warn("degenerate flipped point set; treating all points as visible", stacklevel=2)
        return np.arange(len(pts))
    verts = np.asarray(verts)
    return np.sort(verts[verts < len(pts)])


def overlap_fraction(a, b, eps_m: float) -> float:
    """Symmetric coverage: the smaller of the two fractions of points within ``eps_m`` of the other cloud."""
    a = as_points(a)
    b = as_points(b)
    if not eps_m > 0:
        raise ValueError("eps must be positive")
    da, _ = cKDTree(b).query(a, distance_upper_bound=eps_m)
    db, _ = cKDTree(a).query(b, distance_upper_bound=eps_m)
    return float(min(np.mean(da <= eps_m), np.mean(db <= eps_m)))


def median_spacing(pc) -> float:
    pts = as_points(pc)
    if len(pts) < 2:
        return 0.0
    d, _ = cKDTree(pts).query(pts, k=2)
    return float(np.median(d[:, 1]))


def default_overlap_eps(a, b) -> float:
    """Twice the median nearest-neighbor spacing of the two fragments."""
    return 2.0 * float(np.median([median_spacing(a), median_spacing(b)]))


@dataclass(frozen=True)
class GenerateParams:
    radius: float = 1.5
    overlap_min: float = 0.6
    eps: float | None = None
    rng_seed: int = 0
    hpr_radius_factor: float = 10.0
    min_fragment_points: int = 10


def sample_perturbation(rng: np.random.Generator):
    """Euler angles uniform in [0, 45] degrees, translation uniform in [-0.5, 0.5] m."""
    angles = rng.uniform(0.0, MAX_ANGLE_DEG, size=3)
    offset = rng.uniform(-MAX_OFFSET_M, MAX_OFFSET_M, size=3)
    return angles, RigidTransform(euler_to_matrix(angles), offset)


def pair_seed(rng_seed: int, scan_index: int, i: int, j: int) -> int:
    return int(np.random.SeedSequence([rng_seed, scan_index, i, j]).generate_state(1)[0])


def scan_fragments(scan, params: GenerateParams) -> dict[int, np.ndarray]:
    """Floor-aligned scan cut into visible fragments keyed by viewpoint index."""
    pts = floor_align(scan)
    vps = drop_below_floor(icosahedron_viewpoints(pts.mean(axis=0), params.radius))
    frags = {}
    for vp in vps:
        idx = hidden_point_removal(pts, vp.position, params.hpr_radius_factor)
        if len(idx) >= params.min_fragment_points:
            frags[vp.index] = pts[idx]
    return frags


def generate(out_dir, scans, params: GenerateParams = GenerateParams()) -> dict:
    """Write fragments and ``manifest.json`` under ``out_dir``; return the manifest.

    ``scans`` is a sequence of paths or ``(name, points)`` tuples. Pair ids are
    ``"<scan>:<i>-<j>"`` with viewpoint ``i`` perturbed (source) and ``j`` fixed
    (target). ``gt`` is the perturbation applied to the source fragment, so
    ``inverse(gt)`` registers the source onto the target.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pairs, errors = [], []
    for s_idx, scan in enumerate(scans):
        try:
            name, pts = _load_scan(scan)
            frags = scan_fragments(pts, params)
        except (OSError, ValueError) as exc:
            errors.append({"scan": str(scan if not isinstance(scan, tuple) else scan[0]), "error": str(exc)})
            log.warning("skipping scan %s: %s", scan, exc)
            continue
        written = set()
        for i, j in itertools.combinations(sorted(frags), 2):
            a, b = frags[i], frags[j]
            eps = params.eps if params.eps is not None else default_overlap_eps(a, b)
            ov = overlap_fraction(a, b, eps)
            if not ov > params.overlap_min:
                continue
            seed = pair_seed(params.rng_seed, s_idx, i, j)
            angles, gt = sample_perturbation(np.random.default_rng(seed))
            pid = f"{name}:{i}-{j}"
            src_file = f"{name}_pair_{i:02d}_{j:02d}_source.ply"
            tgt_file = f"{name}_view_{j:02d}.ply"
            write_point_cloud(out / src_file, apply_transform(a, gt))
            if tgt_file not in written:
                write_point_cloud(out / tgt_file, b)
                written.add(tgt_file)
            pairs.append(
                {
                    "id": pid,
                    "scan": name,
                    "source": src_file,
                    "target": tgt_file,
                    "source_view": i,
                    "target_view": j,
                    "gt": [float(v) for v in gt.as_matrix().reshape(-1)],
                    "euler_deg": [float(v) for v in angles],
                    "overlap": ov,
                    "eps": eps,
                    "seed": seed,
                }
            )
    if not pairs:
        raise ValueError("no registration pairs generated")
    manifest = {"pairs": pairs, "params": asdict(params), "errors": errors}
    write_json(out / "manifest.json", manifest)
    return manifest


def _load_scan(scan):
    if isinstance(scan, tuple):
        return str(scan[0]), as_points(scan[1])
    path = Path(scan)
    return path.stem, read_point_cloud(path)
