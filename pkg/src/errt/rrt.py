"""Multi-goal RRT* over the binary occupancy grid.

One tree is grown from the vehicle position for a fixed number of
iterations; every goal is then matched against the whole tree, which
yields the shortest tree path to each goal that the budget managed to
reach.  Unknown voxels are treated as obstacles during growth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import StartBlocked
from .sensor import NOT_FREE_MASK
from .voxel_world import VoxelWorld, _axis_index, segment_blocked

_NO_SKIP = np.array([-1, -1, -1], dtype=np.int64)


@dataclass
class Tree:
    positions: np.ndarray
    parents: np.ndarray
    costs: np.ndarray

    def __len__(self) -> int:
        return len(self.positions)

    def chain(self, node: int) -> np.ndarray:
        """Positions from the root down to ``node``."""
        out = []
        while node >= 0:
            out.append(self.positions[node])
            node = int(self.parents[node])
        return np.array(out[::-1])


@dataclass
class Trajectory:
    points: np.ndarray
    spacing: float
    goal_index: int | None = None

    def __len__(self) -> int:
        return len(self.points)

    @property
    def length(self) -> float:
        if len(self.points) < 2:
            return 0.0
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())


@dataclass
class TreeResult:
    tree: Tree
    best_nodes: list[int | None]
    best_costs: list[float | None] = field(default_factory=list)


# ---------------------------------------------------------------------------
# compiled growth
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _dist(a, b):
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)


@njit(cache=True, inline="always")
def _free_at(labels, origin, res, p):
    nx, ny, nz = labels.shape
    i = _axis_index((p[0] - origin[0]) / res, nx)
    j = _axis_index((p[1] - origin[1]) / res, ny)
    k = _axis_index((p[2] - origin[2]) / res, nz)
    return labels[i, j, k] == 0


@njit(cache=True)
def _propagate(parents, costs, positions, n, root):
    stack = [root]
    while len(stack) > 0:
        q = stack.pop()
        for m in range(n):
            if parents[m] == q:
                costs[m] = costs[q] + _dist(positions[q], positions[m])
                stack.append(m)


@njit(cache=True)
def _grow(labels, origin, res, start, samples, step_max, gamma, block_mask):
    n_max = samples.shape[0] + 1
    positions = np.empty((n_max, 3))
    parents = np.full(n_max, -1, np.int64)
    costs = np.zeros(n_max)
    positions[0] = start
    n = 1
    near = np.empty(n_max, np.int64)
    new = np.empty(3)
    for it in range(samples.shape[0]):
        s = samples[it]
        if not _free_at(labels, origin, res, s):
            continue
        nearest = 0
        best = np.inf
        for q in range(n):
            dq = _dist(positions[q], s)
            if dq < best:
                best = dq
                nearest = q
        if best <= 0.0:
            continue
        scale = min(1.0, step_max / best)
        for ax in range(3):
            new[ax] = positions[nearest, ax] + scale * (s[ax] - positions[nearest, ax])
        if not _free_at(labels, origin, res, new):
            continue
        if segment_blocked(labels, origin, res, positions[nearest], new, block_mask, _NO_SKIP):
            continue
        if n > 1:
            radius = min(gamma * (math.log(n) / n) ** (1.0 / 3.0), step_max)
        else:
            radius = step_max
        n_near = 0
        for q in range(n):
            if _dist(positions[q], new) <= radius:
                near[n_near] = q
                n_near += 1
        parent = nearest
        cost = costs[nearest] + _dist(positions[nearest], new)
        for t in range(n_near):
            q = near[t]
            if q == nearest:
                continue
            c = costs[q] + _dist(positions[q], new)
            if c < cost and not segment_blocked(labels, origin, res, positions[q], new,
                                                block_mask, _NO_SKIP):
                parent = q
                cost = c
        positions[n] = new
        parents[n] = parent
        costs[n] = cost
        me = n
        n += 1
        for t in range(n_near):
            q = near[t]
            if q == parent:
                continue
            c = cost + _dist(new, positions[q])
            if c < costs[q] - 1e-12 and not segment_blocked(labels, origin, res, new,
                                                           positions[q], block_mask, _NO_SKIP):
                parents[q] = me
                costs[q] = c
                _propagate(parents, costs, positions, n, q)
    return positions[:n].copy(), parents[:n].copy(), costs[:n].copy()


@njit(cache=True)
def _match_goals(labels, origin, res, positions, costs, goals, radius, block_mask):
    n_goal = goals.shape[0]
    best = np.full(n_goal, -1, np.int64)
    best_cost = np.full(n_goal, np.inf)
    for g in range(n_goal):
        for q in range(positions.shape[0]):
            d = _dist(positions[q], goals[g])
            if d > radius:
                continue
            c = costs[q] + d
            if c < best_cost[g] and not segment_blocked(labels, origin, res, positions[q],
                                                        goals[g], block_mask, _NO_SKIP):
                best[g] = q
                best_cost[g] = c
    return best, best_cost


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def rewire_gamma(world: VoxelWorld) -> float:
    """RRT* neighbourhood constant for the free volume of ``world`` (3D bound)."""
    free_volume = max(world.count(0), 1) * world.resolution ** 3
    unit_ball = 4.0 / 3.0 * math.pi
    return 2.0 * (1.0 + 1.0 / 3.0) ** (1.0 / 3.0) * (free_volume / unit_ball) ** (1.0 / 3.0)


def grow_tree(world: VoxelWorld, start, goals, iterations: int,
              rng: np.random.Generator, goal_radius: float | None = None,
              step_max: float | None = None) -> TreeResult:
    """Grow one RRT* tree from ``start`` and match it against every goal.

    Samples are drawn uniformly over the map volume; samples outside free
    space still consume an iteration.  ``best_nodes[g]`` is the tree node
    through which goal ``g`` is reached most cheaply (a node within
    ``goal_radius`` of the goal with a clear segment to it), or None.
    """
    start = np.asarray(start, dtype=np.float64)
    if not world.is_free(start):
        raise StartBlocked(f"start {start} is not in a free voxel")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    res = world.resolution
    goal_radius = res if goal_radius is None else goal_radius
    step_max = 2.0 * res if step_max is None else step_max
    samples = rng.uniform(world.origin, world.upper, size=(iterations, 3))
    positions, parents, costs = _grow(world.labels, world.origin, res, start, samples,
                                      step_max, rewire_gamma(world), NOT_FREE_MASK)
    goal_arr = np.asarray(goals, dtype=np.float64).reshape(-1, 3)
    best, best_cost = _match_goals(world.labels, world.origin, res, positions, costs,
                                   goal_arr, goal_radius, NOT_FREE_MASK)
    nodes = [int(b) if b >= 0 else None for b in best]
    total = [float(c) if b >= 0 else None for b, c in zip(best, best_cost)]
    return TreeResult(Tree(positions, parents, costs), nodes, total)


def extract_chain(result: TreeResult, goals, g: int) -> np.ndarray | None:
    """Root-to-goal vertex chain for goal ``g`` (the goal itself appended)."""
    node = result.best_nodes[g]
    if node is None:
        return None
    chain = result.tree.chain(node)
    goal = np.asarray(goals, dtype=np.float64).reshape(-1, 3)[g]
    if not np.array_equal(chain[-1], goal):
        chain = np.vstack([chain, goal])
    return chain


def improve_path(chain, world: VoxelWorld) -> np.ndarray:
    """Shortcut a collision-free vertex chain.

    First the goal is joined to the earliest vertex that sees it directly
    and everything in between is dropped; then one forward pass removes
    each vertex whose neighbours can be joined by a free segment.
    """
    chain = np.asarray(chain, dtype=np.float64)
    if len(chain) <= 2:
        return chain.copy()
    goal = chain[-1]
    for first in range(len(chain) - 1):
        if world.segment_free(chain[first], goal):
            chain = np.vstack([chain[: first + 1], goal])
            break
    kept = [chain[0]]
    for i in range(1, len(chain) - 1):
        if not world.segment_free(kept[-1], chain[i + 1]):
            kept.append(chain[i])
    kept.append(chain[-1])
    return np.array(kept)


def interpolate(chain, spacing: float = 0.75, goal_index: int | None = None) -> Trajectory:
    """Resample a vertex chain so consecutive points are at most ``spacing`` apart.

    Each segment is cut into ``ceil(length / spacing)`` equal parts; the
    original vertices are all kept.
    """
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    chain = np.asarray(chain, dtype=np.float64).reshape(-1, 3)
    points = [chain[0]]
    for a, b in zip(chain[:-1], chain[1:]):
        seg = float(np.linalg.norm(b - a))
        if seg == 0.0:
            continue
        parts = max(1, math.ceil(seg / spacing))
        for m in range(1, parts):
            points.append(a + (b - a) * (m / parts))
        points.append(b)
    return Trajectory(np.array(points), float(spacing), goal_index)
