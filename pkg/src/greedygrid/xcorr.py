"""Valid-mode 3D cross-correlation, by FFT and by direct summation.

Both engines compute ``scores[o] = sum_k source[o + k] * target[k]`` for every
offset ``o`` at which the target lies fully inside the (padded) source.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from .voxel import VoxelVolume


@dataclass(frozen=True, eq=False)
class CorrelationVolume:
    scores: np.ndarray
    rotation_index: int = 0

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.scores.shape)


def _values(vol) -> np.ndarray:
    arr = vol.values if isinstance(vol, VoxelVolume) else vol
    return np.asarray(arr, dtype=np.float64)


def valid_shape(source_shape, target_shape) -> tuple[int, ...]:
    if len(source_shape) != len(target_shape):
        raise ValueError("source and target must have the same number of dimensions")
    out = tuple(s - t + 1 for s, t in zip(source_shape, target_shape))
    if min(out) < 1:
        raise ValueError(
            f"target {tuple(target_shape)} larger than padded source {tuple(source_shape)}"
        )
    return out


def xcorr_direct(source, target, rotation_index: int = 0) -> CorrelationVolume:
    """Direct summation over target cells.

    Costs ``|target| * |output|`` multiply-adds; meant as an oracle and for
    tiny volumes.
    """
    src, tgt = _values(source), _values(target)
    out_shape = valid_shape(src.shape, tgt.shape)
    scores = np.zeros(out_shape)
    nx, ny, nz = out_shape
    for (i, j, k), w in np.ndenumerate(tgt):
        if w != 0.0:
            scores += w * src[i : i + nx, j : j + ny, k : k + nz]
    return CorrelationVolume(scores, rotation_index)


def xcorr_direct_at(source, target, cells) -> np.ndarray:
    """Direct scores at selected output cells only (spot checks on large volumes)."""
    src, tgt = _values(source), _values(target)
    valid_shape(src.shape, tgt.shape)
    tx, ty, tz = tgt.shape
    return np.array(
        [float(np.sum(src[x : x + tx, y : y + ty, z : z + tz] * tgt)) for x, y, z in cells]
    )


def fast_shape(shape) -> tuple[int, ...]:
    return tuple(scipy.fft.next_fast_len(int(s), real=True) for s in shape)


class FFTCorrelator:
    """Correlate many sources against one fixed target.

    The conjugated target spectrum is cached per transform size, so sources
    that round up to the same fast size reuse it.
    """

    def __init__(self, target, workers: int | None = None, cache_size: int = 64):
        self.target = _values(target)
        self.workers = workers
        self._spectrum = lru_cache(maxsize=cache_size)(self._compute_spectrum)

    def _compute_spectrum(self, shape):
        return np.conj(scipy.fft.rfftn(self.target, s=shape, workers=self.workers))

    def correlate(self, source, rotation_index: int = 0) -> CorrelationVolume:
        src = _values(source)
        out_shape = valid_shape(src.shape, self.target.shape)
        # circular correlation on >= source size never wraps inside the valid region
        shape = fast_shape(src.shape)
        prod = scipy.fft.rfftn(src, s=shape, workers=self.workers)
        prod *= self._spectrum(shape)
        full = scipy.fft.irfftn(prod, s=shape, workers=self.workers)
        scores = np.ascontiguousarray(full[: out_shape[0], : out_shape[1], : out_shape[2]])
        return CorrelationVolume(scores, rotation_index)

    __call__ = correlate


def xcorr_fft(source, target, rotation_index: int = 0) -> CorrelationVolume:
    return FFTCorrelator(target).correlate(source, rotation_index)


ENGINES = {"fft", "direct"}
