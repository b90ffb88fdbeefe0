"""Greedy grid-search rigid registration of 3D point clouds.

Candidate rotations are sampled on an Euler grid; for each one the best
translation comes from an FFT cross-correlation of voxel occupancy volumes.
"""

from .geometry import EulerAngles, RigidTransform, apply_transform, euler_to_matrix
from .metrics import EvalThresholds, evaluate, rre, rte
from .refine import IcpConfig, icp_refine
from .rotgrid import RotationGrid, build_grid, covering_bound_deg
from .solver import PeakResult, RegistrationResult, register
from .voxel import VoxelConfig, VoxelVolume, voxelize
from .xcorr import CorrelationVolume, xcorr_direct, xcorr_fft

__all__ = [
    "CorrelationVolume",
    "EulerAngles",
    "EvalThresholds",
    "IcpConfig",
    "PeakResult",
    "RegistrationResult",
    "RigidTransform",
    "RotationGrid",
    "VoxelConfig",
    "VoxelVolume",
    "apply_transform",
    "build_grid",
    "covering_bound_deg",
    "euler_to_matrix",
    "evaluate",
    "icp_refine",
    "register",
    "rre",
    "rte",
    "voxelize",
    "xcorr_direct",
    "xcorr_fft",
]

__version__ = "0.1.0"
