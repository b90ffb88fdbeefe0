"""Dense occupancy volumes with positive/negative cell values."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RegistrationError
from .geometry import as_points


@dataclass(frozen=True)
class VoxelConfig:
    resolution_m: float
    positive_value: float = 5.0
    negative_value: float = -1.0

    def __post_init__(self):
        if not self.resolution_m > 0:
            raise ValueError(f"voxel resolution must be positive, got {self.resolution_m}")
        if self.positive_value == self.negative_value:
            raise ValueError("positive and negative voxel values must differ")


@dataclass(frozen=True, eq=False)
class VoxelVolume:
    """Dense grid of cell values.

    ``padding`` lists the cells added on the (left, right, top, bottom,
    front, back) sides, i.e. (x-low, x-high, y-low, y-high, z-low, z-high).
    Padding cells hold zero.
    """

    values: np.ndarray
    resolution_m: float
    padding: tuple[int, int, int, int, int, int] = (0, 0, 0, 0, 0, 0)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.values.shape)

    @property
    def unpadded_dims(self) -> tuple[int, int, int]:
        p = self.padding
        return tuple(d - p[2 * a] - p[2 * a + 1] for a, d in enumerate(self.dims))


def voxel_dims(extent: np.ndarray, resolution_m: float) -> tuple[int, int, int]:
    """Cells needed per axis to cover ``[0, extent]``; at least one."""
    dims = np.maximum(1, np.ceil(np.asarray(extent) / resolution_m)).astype(np.int64)
    return tuple(int(d) for d in dims)


def occupied_indices(pc, resolution_m: float) -> tuple[np.ndarray, tuple[int, int, int]]:
    """Integer cell index of each point and the grid dims, for a positive-shifted cloud."""
    pts = as_points(pc)
    if np.any(pts < 0):
        raise RegistrationError("cloud not positive-shifted")
    dims = voxel_dims(pts.max(axis=0), resolution_m)
    idx = np.floor(pts / resolution_m).astype(np.int64)
    # points on the far boundary belong to the last cell
    np.minimum(idx, np.asarray(dims) - 1, out=idx)
    return idx, dims


def voxelize(pc, cfg: VoxelConfig) -> VoxelVolume:
    """Occupancy volume of a positive-shifted cloud: PV where a point falls, NV elsewhere."""
    idx, dims = occupied_indices(pc, cfg.resolution_m)
    values = np.full(dims, cfg.negative_value, dtype=np.float64)
    values[idx[:, 0], idx[:, 1], idx[:, 2]] = cfg.positive_value
    return VoxelVolume(values, cfg.resolution_m)


def compute_padding(source_dims, target_dims) -> tuple[int, int, int, int, int, int]:
    """Padding that lets the target slide over every source cell.

    Each axis receives ``target - 1`` cells in total, ``ceil`` of half on the
    low side and ``floor`` on the high side, so a valid correlation of the
    padded source has exactly ``source_dims`` cells.
    """
    pad = []
    for s, t in zip(source_dims, target_dims):
        if s < 1 or t < 1:
            raise ValueError(f"dims must be >= 1, got {source_dims} and {target_dims}")
        total = t - 1
        pad += [(total + 1) // 2, total // 2]
    return tuple(pad)


def pad_volume(vol: VoxelVolume, padding) -> VoxelVolume:
    padding = tuple(int(p) for p in padding)
    if len(padding) != 6 or min(padding) < 0:
        raise ValueError(f"padding must be 6 non-negative integers, got {padding}")
    widths = [(padding[0], padding[1]), (padding[2], padding[3]), (padding[4], padding[5])]
    values = np.pad(vol.values, widths, mode="constant", constant_values=0.0)
    total = tuple(a + b for a, b in zip(vol.padding, padding))
    return VoxelVolume(values, vol.resolution_m, total)


def central_voxel(dims) -> tuple[int, int, int]:
    """0-based index of the central cell: the middle one for odd counts,
    the one left of the middle for even counts."""
    return tuple((int(d) + 1) // 2 - 1 for d in dims)
