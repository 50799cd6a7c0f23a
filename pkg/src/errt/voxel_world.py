"""Dense 3D voxel map with Free / Occupied / Unknown labels.

The grid is the planner's only view of the world.  Positions are metric and
relative to ``origin``; voxel ``(i, j, k)`` spans ``origin + [i, i+1) * res``
on each axis.  Points lying exactly on a shared face belong to the
lower-index voxel, and the max corner of the grid is still inside.
"""
from __future__ import annotations

import math
from enum import IntEnum
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from numba import njit

from .errors import OutOfBoundsError, ParseError


class Label(IntEnum):
    FREE = 0
    OCCUPIED = 1
    UNKNOWN = 2
    OUT_OF_BOUNDS = -1


FREE = int(Label.FREE)
OCCUPIED = int(Label.OCCUPIED)
UNKNOWN = int(Label.UNKNOWN)

#: Blocking sets, as label collections.
BLOCK_OCCUPIED = frozenset({Label.OCCUPIED})
BLOCK_NOT_FREE = frozenset({Label.OCCUPIED, Label.UNKNOWN})


class VoxelRef(NamedTuple):
    index: tuple[int, int, int]
    center: np.ndarray


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------

_TIE_EPS = 1e-9


@njit(cache=True, inline="always")
def _axis_index(u, n):
    # u is in voxel units; faces resolve to the lower-index voxel
    i = int(math.ceil(u)) - 1
    if i < 0:
        i = 0
    if i > n - 1:
        i = n - 1
    return i


@njit(cache=True)
def _is_blocked(labels, i, j, k, block_mask, skip):
    if i == skip[0] and j == skip[1] and k == skip[2]:
        return False
    return block_mask[labels[i, j, k]]


@njit(cache=True)
def segment_blocked(labels, origin, res, a, b, block_mask, skip):
    """Exact 6-connected grid walk from ``a`` to ``b``.

    Returns True as soon as a voxel whose label is flagged in ``block_mask``
    is touched.  ``skip`` is a voxel index excluded from blocking (pass
    ``(-1, -1, -1)`` to disable).  Exact edge/corner crossings check every
    voxel sharing the crossing so the walk is symmetric in ``a`` and ``b``.
    """
    nx, ny, nz = labels.shape
    dims = (nx, ny, nz)
    p0 = np.empty(3)
    d = np.empty(3)
    cur = np.empty(3, np.int64)
    end = np.empty(3, np.int64)
    step = np.zeros(3, np.int64)
    t_max = np.empty(3)
    t_delta = np.empty(3)
    for ax in range(3):
        p0[ax] = (a[ax] - origin[ax]) / res
        d[ax] = (b[ax] - origin[ax]) / res - p0[ax]
        cur[ax] = _axis_index(p0[ax], dims[ax])
        end[ax] = _axis_index(p0[ax] + d[ax], dims[ax])
        if end[ax] > cur[ax]:
            step[ax] = 1
            t_max[ax] = (cur[ax] + 1 - p0[ax]) / d[ax]
            t_delta[ax] = 1.0 / d[ax]
        elif end[ax] < cur[ax]:
            step[ax] = -1
            t_max[ax] = (cur[ax] - p0[ax]) / d[ax]
            t_delta[ax] = -1.0 / d[ax]
        else:
            t_max[ax] = np.inf
            t_delta[ax] = np.inf
    if _is_blocked(labels, cur[0], cur[1], cur[2], block_mask, skip):
        return True
    remaining = abs(end[0] - cur[0]) + abs(end[1] - cur[1]) + abs(end[2] - cur[2])
    while remaining > 0:
        best = np.inf
        for ax in range(3):
            if cur[ax] != end[ax] and t_max[ax] < best:
                best = t_max[ax]
        tied0 = cur[0] != end[0] and t_max[0] - best <= _TIE_EPS
        tied1 = cur[1] != end[1] and t_max[1] - best <= _TIE_EPS
        tied2 = cur[2] != end[2] and t_max[2] - best <= _TIE_EPS
        n_tied = int(tied0) + int(tied1) + int(tied2)
        if n_tied > 1:
            # every voxel around the shared edge/corner, except the target
            # of the full diagonal move which is checked below
            s0 = step[0] if tied0 else 0
            s1 = step[1] if tied1 else 0
            s2 = step[2] if tied2 else 0
            for m0 in range(2 if tied0 else 1):
                for m1 in range(2 if tied1 else 1):
                    for m2 in range(2 if tied2 else 1):
                        if m0 + m1 + m2 == 0 or m0 + m1 + m2 == n_tied:
                            continue
                        if _is_blocked(labels, cur[0] + m0 * s0, cur[1] + m1 * s1,
                                       cur[2] + m2 * s2, block_mask, skip):
                            return True
        if tied0:
            cur[0] += step[0]
            t_max[0] += t_delta[0]
        if tied1:
            cur[1] += step[1]
            t_max[1] += t_delta[1]
        if tied2:
            cur[2] += step[2]
            t_max[2] += t_delta[2]
        remaining -= n_tied
        if _is_blocked(labels, cur[0], cur[1], cur[2], block_mask, skip):
            return True
    return False


def block_mask_for(blocking: Iterable[int]) -> np.ndarray:
    mask = np.zeros(3, dtype=np.bool_)
    for label in blocking:
        mask[int(label)] = True
    return mask


_NO_SKIP = np.array([-1, -1, -1], dtype=np.int64)


# ---------------------------------------------------------------------------
# the map
# ---------------------------------------------------------------------------

class VoxelWorld:
    """Dense labelled voxel grid.

    Parameters
    ----------
    dims : voxel counts ``(nx, ny, nz)``.
    resolution : voxel edge length in meters.
    origin : metric position of the min corner.
    fill : initial label of every voxel.
    """

    def __init__(self, dims: Sequence[int], resolution: float = 1.0,
                 origin: Sequence[float] = (0.0, 0.0, 0.0),
                 fill: Label = Label.UNKNOWN) -> None:
        dims = tuple(int(n) for n in dims)
        if len(dims) != 3 or min(dims) <= 0:
            raise ValueError(f"dims must be three positive integers, got {dims}")
        if not resolution > 0:
            raise ValueError("resolution must be positive")
        self.dims = dims
        self.resolution = float(resolution)
        self.origin = np.asarray(origin, dtype=np.float64).reshape(3)
        self.labels = np.full(dims, int(fill), dtype=np.int8)

    @classmethod
    def from_labels(cls, labels: np.ndarray, resolution: float = 1.0,
                    origin: Sequence[float] = (0.0, 0.0, 0.0)) -> VoxelWorld:
        world = cls(labels.shape, resolution, origin)
        world.labels[...] = labels
        return world

    def copy(self) -> VoxelWorld:
        return VoxelWorld.from_labels(self.labels.copy(), self.resolution, self.origin)

    # geometry ---------------------------------------------------------------
    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.dims, dtype=np.float64) * self.resolution

    @property
    def upper(self) -> np.ndarray:
        return self.origin + self.extent

    def in_bounds(self, p) -> bool:
        p = np.asarray(p, dtype=np.float64)
        return bool(np.all(p >= self.origin) and np.all(p <= self.upper))

    def index_of(self, p) -> tuple[int, int, int] | None:
        """Voxel index containing ``p``, or None when outside the grid."""
        if not self.in_bounds(p):
            return None
        u = (np.asarray(p, dtype=np.float64) - self.origin) / self.resolution
        return tuple(_axis_index(float(u[ax]), self.dims[ax]) for ax in range(3))

    def center(self, index) -> np.ndarray:
        return self.origin + (np.asarray(index, dtype=np.float64) + 0.5) * self.resolution

    def centers(self, indices: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`center` for an ``(n, 3)`` index array."""
        return self.origin + (np.asarray(indices, dtype=np.float64) + 0.5) * self.resolution

    # labels -------------------------------------------------------------------
    def voxel_state(self, p) -> Label:
        idx = self.index_of(p)
        if idx is None:
            return Label.OUT_OF_BOUNDS
        return Label(int(self.labels[idx]))

    def set_label(self, index, label: Label) -> None:
        i, j, k = index
        if not (0 <= i < self.dims[0] and 0 <= j < self.dims[1] and 0 <= k < self.dims[2]):
            raise OutOfBoundsError(f"voxel index {tuple(index)} outside grid {self.dims}")
        self.labels[i, j, k] = int(label)

    def is_free(self, p) -> bool:
        return self.voxel_state(p) == Label.FREE

    def unknown_indices(self) -> np.ndarray:
        """``(n, 3)`` indices of Unknown voxels in lexicographic order."""
        return np.argwhere(self.labels == UNKNOWN)

    def unknown_voxels(self) -> list[VoxelRef]:
        return [VoxelRef(tuple(int(v) for v in idx), self.center(idx))
                for idx in self.unknown_indices()]

    def count(self, label: Label) -> int:
        return int(np.count_nonzero(self.labels == int(label)))

    def binary_grid(self) -> np.ndarray:
        """1 for Occupied or Unknown, 0 for Free."""
        return (self.labels != FREE).astype(np.uint8)

    # line of sight --------------------------------------------------------------
    def segment_free(self, a, b, blocking=BLOCK_NOT_FREE, skip=None) -> bool:
        """True iff the straight segment ``a -> b`` touches no blocking voxel.

        ``skip`` optionally names one voxel index that never blocks.
        """
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if not (self.in_bounds(a) and self.in_bounds(b)):
            raise OutOfBoundsError(f"segment endpoint outside grid: {a} -> {b}")
        skip_arr = _NO_SKIP if skip is None else np.asarray(skip, dtype=np.int64)
        return not segment_blocked(self.labels, self.origin, self.resolution, a, b,
                                   block_mask_for(blocking), skip_arr)

    def __repr__(self) -> str:
        return (f"VoxelWorld(dims={self.dims}, res={self.resolution}, "
                f"free={self.count(Label.FREE)}, occ={self.count(Label.OCCUPIED)}, "
                f"unknown={self.count(Label.UNKNOWN)})")


# ---------------------------------------------------------------------------
# world files
# ---------------------------------------------------------------------------

_LINE_KINDS = {"occ": Label.OCCUPIED, "unk": Label.UNKNOWN, "free": Label.FREE}


def save_world(world: VoxelWorld, path, default: Label = Label.FREE) -> None:
    """Write ``world`` in the line-oriented text format.

    Only voxels whose label differs from ``default`` are listed.  The
    ``default`` header line is omitted when it is Free, so ground-truth maps
    are exactly ``dims``/``res``/``origin`` plus ``occ i j k`` lines.
    """
    nx, ny, nz = world.dims
    ox, oy, oz = (float(v) for v in world.origin)
    lines = [f"dims {nx} {ny} {nz}", f"res {world.resolution!r}",
             f"origin {ox!r} {oy!r} {oz!r}"]
    if default != Label.FREE:
        lines.append(f"default {default.name.lower()}")
    tags = {Label.OCCUPIED: "occ", Label.UNKNOWN: "unk", Label.FREE: "free"}
    for label in (Label.OCCUPIED, Label.UNKNOWN, Label.FREE):
        if label == default:
            continue
        for i, j, k in np.argwhere(world.labels == int(label)):
            lines.append(f"{tags[label]} {i} {j} {k}")
    Path(path).write_text("\n".join(lines) + "\n")


def parse_world(text: str) -> VoxelWorld:
    dims = res = origin = None
    default = Label.FREE
    cells: list[tuple[Label, tuple[int, int, int], int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        try:
            if head == "dims":
                dims = tuple(int(v) for v in rest)
            elif head == "res":
                (res,) = (float(v) for v in rest)
            elif head == "origin":
                origin = tuple(float(v) for v in rest)
            elif head == "default":
                (name,) = rest
                default = _LINE_KINDS[name] if name in _LINE_KINDS else Label[name.upper()]
            elif head in _LINE_KINDS:
                i, j, k = (int(v) for v in rest)
                cells.append((_LINE_KINDS[head], (i, j, k), lineno))
            else:
                raise ParseError(f"unknown record {head!r}", lineno)
        except (ValueError, KeyError) as exc:
            raise ParseError(f"malformed {head!r} record: {raw.strip()!r}", lineno) from exc
    if dims is None or len(dims) != 3:
        raise ParseError("missing or malformed 'dims' header")
    world = VoxelWorld(dims, 1.0 if res is None else res,
                       (0.0, 0.0, 0.0) if origin is None else origin, fill=default)
    for label, idx, lineno in cells:
        try:
            world.set_label(idx, label)
        except OutOfBoundsError as exc:
            raise ParseError(str(exc), lineno) from exc
    return world


def load_world(path) -> VoxelWorld:
    return parse_world(Path(path).read_text())
