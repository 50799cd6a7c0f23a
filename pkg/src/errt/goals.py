"""Pseudo-random exploration goals.

A goal is a point in known free space from which at least one Unknown
voxel center is inside the sensor view with a clear line of sight (other
Unknown voxels block, as do Occupied ones).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ExplorationExhausted
from .sensor import NOT_FREE_MASK, SensorModel, model_args, visible_mask
from .voxel_world import VoxelRef, VoxelWorld, _axis_index


@dataclass
class GoalSet:
    goals: np.ndarray
    witnesses: list[VoxelRef] = field(default_factory=list)
    attempts: int = 0

    def __len__(self) -> int:
        return len(self.goals)


@njit(cache=True)
def _sample_goals(labels, origin, res, unknown, positions, picks, n_goal,
                  r_s, tan_half, half_l, block_mask):
    nx, ny, nz = labels.shape
    goals = np.empty((n_goal, 3))
    witness = np.empty(n_goal, np.int64)
    n_found = 0
    used = 0
    for a in range(positions.shape[0]):
        used = a + 1
        p = positions[a]
        i = _axis_index((p[0] - origin[0]) / res, nx)
        j = _axis_index((p[1] - origin[1]) / res, ny)
        k = _axis_index((p[2] - origin[2]) / res, nz)
        if labels[i, j, k] != 0:
            continue
        vis = visible_mask(labels, origin, res, p, unknown, r_s, tan_half, half_l, block_mask)
        n_vis = 0
        for c in range(vis.shape[0]):
            if vis[c]:
                n_vis += 1
        if n_vis == 0:
            continue
        chosen = min(int(picks[a] * n_vis), n_vis - 1)
        for c in range(vis.shape[0]):
            if vis[c]:
                if chosen == 0:
                    witness[n_found] = c
                    break
                chosen -= 1
        goals[n_found] = p
        n_found += 1
        if n_found == n_goal:
            break
    return goals[:n_found], witness[:n_found], used


def generate_goals(world: VoxelWorld, model: SensorModel, n_goal: int,
                   rng: np.random.Generator, max_attempts: int | None = None) -> GoalSet:
    """Sample up to ``n_goal`` goals uniformly over the map volume.

    Each accepted goal carries the Unknown voxel that certified it.  Fewer
    than ``n_goal`` goals are returned only when ``max_attempts`` (default
    ``200 * n_goal``) candidate positions have been tried.

    Raises
    ------
    ExplorationExhausted
        When the map holds no Unknown voxel at all.
    """
    if n_goal < 1:
        raise ValueError("n_goal must be >= 1")
    unknown = world.unknown_indices()
    if len(unknown) == 0:
        raise ExplorationExhausted("no unknown voxels left")
    if max_attempts is None:
        max_attempts = 200 * n_goal
    positions = rng.uniform(world.origin, world.upper, size=(max_attempts, 3))
    picks = rng.random(max_attempts)
    goals, witness, used = _sample_goals(world.labels, world.origin, world.resolution,
                                         unknown, positions, picks, n_goal,
                                         *model_args(model), NOT_FREE_MASK)
    refs = [VoxelRef(tuple(int(v) for v in unknown[w]), world.center(unknown[w]))
            for w in witness]
    return GoalSet(goals.copy(), refs, int(used))
