"""Simplified 3D lidar: range-limited ring with a narrow vertical fan.

A target is in view of a sensor at ``viewpoint`` when its horizontal
distance is at most ``range_m`` and its height offset stays inside the
vertical fan widened by half the scanner array height.  Attitude is taken
as level, so the model is symmetric under yaw.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import OutOfBoundsError
from .voxel_world import VoxelRef, VoxelWorld, segment_blocked


@dataclass(frozen=True)
class SensorModel:
    range_m: float = 6.0
    fov_rad: float = math.radians(32.0)
    array_m: float = 0.1

    def __post_init__(self):
        if not self.range_m > 0:
            raise ValueError(f"sensor range must be positive, got {self.range_m}")
        if not 0 < self.fov_rad < math.pi:
            raise ValueError(f"field of view must lie in (0, pi), got {self.fov_rad}")
        if not self.array_m >= 0:
            raise ValueError(f"sensor array height must be >= 0, got {self.array_m}")

    @classmethod
    def from_degrees(cls, range_m=6.0, fov_deg=32.0, array_m=0.1) -> SensorModel:
        return cls(float(range_m), math.radians(fov_deg), float(array_m))

    @property
    def tan_half_fov(self) -> float:
        return math.tan(self.fov_rad / 2.0)

    def with_range(self, range_m: float) -> SensorModel:
        return SensorModel(range_m, self.fov_rad, self.array_m)


@njit(cache=True, inline="always")
def _in_view(vx, vy, vz, tx, ty, tz, r_s, tan_half, half_l):
    horiz = math.sqrt((vx - tx) ** 2 + (vy - ty) ** 2)
    if horiz > r_s:
        return False
    return abs(vz - tz) <= horiz * tan_half + half_l


def in_sensor_view(viewpoint, target, model: SensorModel) -> bool:
    """Both sensor inequalities, inclusive at the boundary."""
    v = np.asarray(viewpoint, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    return bool(_in_view(v[0], v[1], v[2], t[0], t[1], t[2],
                         model.range_m, model.tan_half_fov, model.array_m / 2.0))


@njit(cache=True)
def visible_mask(labels, origin, res, viewpoint, cand, r_s, tan_half, half_l, block_mask):
    """For each candidate voxel index, in view with a clear line of sight.

    The candidate voxel never blocks its own line of sight.
    """
    n = cand.shape[0]
    out = np.zeros(n, np.bool_)
    target = np.empty(3)
    skip = np.empty(3, np.int64)
    for c in range(n):
        for ax in range(3):
            target[ax] = origin[ax] + (cand[c, ax] + 0.5) * res
        if not _in_view(viewpoint[0], viewpoint[1], viewpoint[2],
                        target[0], target[1], target[2], r_s, tan_half, half_l):
            continue
        skip[0] = cand[c, 0]
        skip[1] = cand[c, 1]
        skip[2] = cand[c, 2]
        if not segment_blocked(labels, origin, res, viewpoint, target, block_mask, skip):
            out[c] = True
    return out


@njit(cache=True)
def seen_along(labels, origin, res, points, cand, r_s, tan_half, half_l, block_mask):
    """Union of :func:`visible_mask` over every point of a path."""
    n = cand.shape[0]
    seen = np.zeros(n, np.bool_)
    target = np.empty(3)
    skip = np.empty(3, np.int64)
    for p in range(points.shape[0]):
        vp = points[p]
        for c in range(n):
            if seen[c]:
                continue
            for ax in range(3):
                target[ax] = origin[ax] + (cand[c, ax] + 0.5) * res
            if not _in_view(vp[0], vp[1], vp[2], target[0], target[1], target[2],
                            r_s, tan_half, half_l):
                continue
            skip[0] = cand[c, 0]
            skip[1] = cand[c, 1]
            skip[2] = cand[c, 2]
            if not segment_blocked(labels, origin, res, vp, target, block_mask, skip):
                seen[c] = True
    return seen


#: Line of sight for planning is blocked by Occupied and Unknown voxels.
NOT_FREE_MASK = np.array([False, True, True])
#: Ground-truth sensing is blocked by Occupied voxels only.
OCCUPIED_MASK = np.array([False, True, False])


def model_args(model: SensorModel) -> tuple[float, float, float]:
    return model.range_m, model.tan_half_fov, model.array_m / 2.0


def visible_unknowns(viewpoint, world: VoxelWorld, model: SensorModel) -> list[VoxelRef]:
    """Unknown voxels whose centers the sensor would see from ``viewpoint``.

    Line of sight is blocked by Occupied and by other Unknown voxels.
    """
    vp = np.asarray(viewpoint, dtype=np.float64)
    if not world.in_bounds(vp):
        raise OutOfBoundsError(f"viewpoint {vp} outside grid")
    cand = world.unknown_indices()
    mask = visible_mask(world.labels, world.origin, world.resolution, vp, cand,
                        *model_args(model), NOT_FREE_MASK)
    return [VoxelRef(tuple(int(v) for v in idx), world.center(idx)) for idx in cand[mask]]


def count_seen_unknowns(points, world: VoxelWorld, model: SensorModel) -> int:
    """Number of distinct Unknown voxels visible from any of ``points``."""
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    cand = world.unknown_indices()
    if len(cand) == 0 or len(pts) == 0:
        return 0
    seen = seen_along(world.labels, world.origin, world.resolution, pts, cand,
                      *model_args(model), NOT_FREE_MASK)
    return int(np.count_nonzero(seen))

