"""Closed-loop exploration missions on synthetic cave worlds.

A mission repeats plan -> fly -> discover on a known map that starts
Unknown everywhere except a ball around the start.  The vehicle is a
kinematic follower moving at constant speed along the chosen trajectory;
poses are sampled at a fixed interval, perturbed by localization noise,
and each reported pose reveals the truth labels of every voxel center the
(slightly longer-range) sensor sees with no truth-Occupied voxel in the
way.  Time is simulated, never wall clock.

Coverage is measured over the *feasible* voxels: those whose center some
free voxel center can see under the planner's sensor model.  Rock sealed
behind other rock can never be observed and is left out.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import ndimage

from .errors import ExplorationExhausted, GenerationFailed, MissionStalled, NoCandidates
from .pipeline import PlannerSettings, plan_with_retry
from .rrt import Trajectory
from .seeds import stream, sub_seed
from .sensor import OCCUPIED_MASK, SensorModel, model_args, visible_mask
from .voxel_world import Label, VoxelWorld

log = logging.getLogger(__name__)

_FREE, _OCC, _UNK = int(Label.FREE), int(Label.OCCUPIED), int(Label.UNKNOWN)


# ---------------------------------------------------------------------------
# world generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WorldSpec:
    dims: tuple[int, int, int] = (27, 27, 4)
    resolution: float = 1.0
    n_rooms: tuple[int, int] = (4, 6)
    n_nooks: tuple[int, int] = (2, 4)
    low_height: int = 2
    max_tries: int = 20

    def __post_init__(self):
        if len(self.dims) != 3 or min(self.dims[:2]) < 5 or self.dims[2] < 3:
            raise ValueError(f"world needs >= 5 voxels per horizontal axis and >= 3 vertically, got {self.dims}")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")


def _carve(labels, x0, x1, y0, y1, z0, z1):
    nx, ny, nz = labels.shape
    labels[max(x0, 0):min(x1, nx), max(y0, 0):min(y1, ny), max(z0, 0):min(z1, nz)] = _FREE


def _corridor(labels, a, b, width, height, rng):
    """L-shaped corridor between two (x, y) cells on the floor."""
    (ax, ay), (bx, by) = a, b
    if rng.random() < 0.5:
        corner = (bx, ay)
    else:
        corner = (ax, by)
    for (px, py), (qx, qy) in ((a, corner), (corner, b)):
        x0, x1 = sorted((px, qx))
        y0, y1 = sorted((py, qy))
        _carve(labels, x0, x1 + width, y0, y1 + width, 0, height)


def _room_center(room):
    x0, x1, y0, y1 = room
    return (x0 + x1) // 2, (y0 + y1) // 2


def _attempt(spec: WorldSpec, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    nx, ny, nz = spec.dims
    labels = np.full(spec.dims, _OCC, np.int8)
    if min(nx, ny) < 12:
        _carve(labels, 1, nx - 1, 1, ny - 1, 0, nz)
        return labels, 0

    # chambers span the full height; only the crawlways and nooks are low
    rooms = []
    w, d = rng.integers(4, 7, size=2)
    rooms.append((1, 1 + w, 1, 1 + d))
    # the large void, away from the start corner
    side = max(7, min(nx, ny) // 3)
    vx = int(rng.integers(nx // 3, nx - side))
    vy = int(rng.integers(ny // 3, ny - side))
    rooms.append((vx, vx + side, vy, vy + side))
    for _ in range(int(rng.integers(spec.n_rooms[0], spec.n_rooms[1] + 1))):
        w, d = rng.integers(3, 7, size=2)
        x0 = int(rng.integers(1, nx - w))
        y0 = int(rng.integers(1, ny - d))
        rooms.append((x0, x0 + w, y0, y0 + d))
    for x0, x1, y0, y1 in rooms:
        _carve(labels, x0, x1, y0, y1, 0, nz)

    # spanning passages: each room joins the nearest earlier one
    centers = [_room_center(r) for r in rooms]
    for i in range(1, len(rooms)):
        dists = [abs(centers[i][0] - centers[j][0]) + abs(centers[i][1] - centers[j][1])
                 for j in range(i)]
        j = int(np.argmin(dists))
        _corridor(labels, centers[j], centers[i], int(rng.integers(1, 3)), nz, rng)
    # a few low crawlways closing loops; a uniform-sampling tree almost never
    # threads a 1x1 voxel tube, so low passages are two voxels high
    low = min(spec.low_height, nz)
    for _ in range(int(rng.integers(1, 3))):
        i, j = rng.choice(len(rooms), size=2, replace=False)
        _corridor(labels, centers[i], centers[j], 1, low, rng)

    # low dead-end nooks poking out of rooms into solid rock, two voxels wide
    # so their far walls can be seen from more than a single voxel
    nooks = 0
    want = int(rng.integers(spec.n_nooks[0], spec.n_nooks[1] + 1))
    directions = ((1, 0), (-1, 0), (0, 1), (0, -1))
    for _ in range(20 * want):
        if nooks >= want:
            break
        x0, x1, y0, y1 = rooms[int(rng.integers(len(rooms)))]
        dx, dy = directions[int(rng.integers(4))]
        length = int(rng.integers(2, 5))
        if dx:
            y = int(rng.integers(y0, y1 - 1))
            xa = x1 if dx > 0 else x0 - length
            box = [xa, xa + length, y, y + 2]
            # the rock around the nook, open only towards the room
            ring = [xa - (dx > 0), xa + length + (dx < 0), y - 1, y + 3]
        else:
            x = int(rng.integers(x0, x1 - 1))
            ya = y1 if dy > 0 else y0 - length
            box = [x, x + 2, ya, ya + length]
            ring = [x - 1, x + 3, ya - (dy > 0), ya + length + (dy < 0)]
        if ring[0] < 0 or ring[2] < 0 or ring[1] > nx or ring[3] > ny:
            continue
        if (labels[box[0]:box[1], box[2]:box[3], :low] == _FREE).any():
            continue
        rock = labels[ring[0]:ring[1], ring[2]:ring[3], :low] == _FREE
        if rock.sum() > 0 and not _only_room_side(rock, dx, dy):
            continue
        _carve(labels, box[0], box[1], box[2], box[3], 0, low)
        nooks += 1
    return labels, nooks


def _only_room_side(free_ring: np.ndarray, dx: int, dy: int) -> bool:
    """True when the free cells of a nook's surroundings all lie on its room-facing edge."""
    inner = free_ring.copy()
    if dx > 0:
        inner[0] = False
    elif dx < 0:
        inner[-1] = False
    elif dy > 0:
        inner[:, 0] = False
    else:
        inner[:, -1] = False
    return not inner.any()


def _connected(free: np.ndarray) -> bool:
    """Face-connected in 3D, and each layer's free cells connected within the layer."""
    if ndimage.label(free)[1] != 1:
        return False
    return all(ndimage.label(free[:, :, k])[1] <= 1 for k in range(free.shape[2]))


def generate_world(spec: WorldSpec = WorldSpec(), seed: int = 0) -> VoxelWorld:
    """Cave-like ground truth: chambers, one large void, passages, crawlways and nooks.

    Every free voxel is face-connected to every other, and within each
    horizontal layer the free cells form one connected region, so each
    layer can be explored by looking along it.  Deterministic in
    ``seed``; rejected layouts are redrawn from the next sub-stream.

    Raises
    ------
    GenerationFailed
        No acceptable layout in ``spec.max_tries`` attempts.
    """
    for attempt in range(spec.max_tries):
        labels, nooks = _attempt(spec, stream(seed, "world", attempt))
        free = labels == _FREE
        fraction = free.mean()
        big = min(spec.dims[:2]) >= 12
        if not _connected(free):
            continue
        if big and (nooks < spec.n_nooks[0] or not 0.2 <= fraction <= 0.8):
            continue
        return VoxelWorld.from_labels(labels, spec.resolution)
    raise GenerationFailed(f"no valid world for seed {seed} in {spec.max_tries} attempts")


def mission_start(truth: VoxelWorld) -> np.ndarray:
    """Deterministic start: the free voxel center closest to the low corner at hover height."""
    free = np.argwhere(truth.labels == _FREE)
    if len(free) == 0:
        raise GenerationFailed("world has no free voxel")
    anchor = np.array([0.0, 0.0, 1.0])
    d = np.linalg.norm(free - anchor, axis=1)
    return truth.center(free[int(np.argmin(d))])


# ---------------------------------------------------------------------------
# sensing
# ---------------------------------------------------------------------------

@njit(cache=True)
def _seen_from_any(labels, origin, res, viewpoints, cand, r_s, tan_half, half_l, block_mask):
    seen = np.zeros(cand.shape[0], np.bool_)
    for v in range(viewpoints.shape[0]):
        vis = visible_mask(labels, origin, res, viewpoints[v], cand, r_s, tan_half, half_l,
                           block_mask)
        for c in range(cand.shape[0]):
            if vis[c]:
                seen[c] = True
    return seen


def feasible_mask(truth: VoxelWorld, model: SensorModel) -> np.ndarray:
    """Voxels some truth-free voxel center sees, only truth-Occupied blocking (boolean grid)."""
    cand = np.argwhere(np.ones(truth.dims, bool))
    views = truth.centers(np.argwhere(truth.labels == _FREE))
    seen = _seen_from_any(truth.labels, truth.origin, truth.resolution, views, cand,
                          *model_args(model), OCCUPIED_MASK)
    return seen.reshape(truth.dims)


def initial_known(truth: VoxelWorld, start, radius: float) -> VoxelWorld:
    """Unknown map with the truth copied inside a ball around ``start``."""
    known = VoxelWorld(truth.dims, truth.resolution, truth.origin, fill=Label.UNKNOWN)
    idx = np.argwhere(np.ones(truth.dims, bool))
    inside = np.linalg.norm(truth.centers(idx) - np.asarray(start, dtype=np.float64), axis=1) <= radius
    sel = tuple(idx[inside].T)
    known.labels[sel] = truth.labels[sel]
    return known


def discover(truth: VoxelWorld, known: VoxelWorld, pose, model: SensorModel) -> int:
    """Copy truth labels of voxels seen from ``pose`` into ``known``; returns how many changed.

    ``model`` is the discovery sensor (planner range plus the margin).  Only
    truth-Occupied voxels block the view.  Poses outside the grid are
    clamped to its boundary.
    """
    pose = np.clip(np.asarray(pose, dtype=np.float64), truth.origin, truth.upper)
    cand = known.unknown_indices()
    if len(cand) == 0:
        return 0
    vis = visible_mask(truth.labels, truth.origin, truth.resolution, pose, cand,
                       *model_args(model), OCCUPIED_MASK)
    sel = tuple(cand[vis].T)
    known.labels[sel] = truth.labels[sel]
    return int(vis.sum())


# ---------------------------------------------------------------------------
# tracking
# ---------------------------------------------------------------------------

@dataclass
class TrackResult:
    times: np.ndarray
    poses: np.ndarray
    reported: np.ndarray
    distance: float
    elapsed: float


def track(traj: Trajectory | np.ndarray, speed: float = 1.2, noise: float = 0.05,
          rng: np.random.Generator | None = None, dt: float = 0.25) -> TrackResult:
    """Fly ``traj`` at constant ``speed``, sampling poses every ``dt`` seconds.

    ``poses`` lie exactly on the trajectory; ``reported`` adds zero-mean
    Gaussian noise of standard deviation ``noise`` per axis.  The last
    sample is the trajectory end at ``elapsed = length / speed``.
    """
    if not speed > 0 or not dt > 0:
        raise ValueError("speed and dt must be positive")
    pts = np.asarray(traj.points if isinstance(traj, Trajectory) else traj, dtype=np.float64)
    pts = pts.reshape(-1, 3)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    length = float(arc[-1])
    elapsed = length / speed
    n = int(math.floor(elapsed / dt + 1e-9))
    times = np.arange(n + 1) * dt
    if times[-1] < elapsed:
        times = np.append(times, elapsed)
    s = np.minimum(times * speed, length)
    if len(pts) == 1:
        poses = np.repeat(pts, len(times), axis=0)
    else:
        poses = np.column_stack([np.interp(s, arc, pts[:, ax]) for ax in range(3)])
    reported = poses.copy()
    if noise > 0:
        rng = np.random.default_rng() if rng is None else rng
        reported = poses + rng.normal(0.0, noise, size=poses.shape)
    return TrackResult(times, poses, reported, length, elapsed)


# ---------------------------------------------------------------------------
# missions
# ---------------------------------------------------------------------------

@dataclass
class MissionConfig:
    seed: int = 0
    preset: str = "greedy"
    world: WorldSpec = field(default_factory=WorldSpec)
    planner: PlannerSettings = field(default_factory=PlannerSettings)
    speed: float = 1.2
    noise: float = 0.05
    dt: float = 0.25
    discovery_margin: float = 1.0
    max_replans: int = 200
    stall_limit: int = 5


@dataclass
class ReplanRecord:
    replan: int
    t: float
    coverage: float
    n_goals: int
    n_found: int
    chosen: int | None
    j_a: float | None
    j_d: float | None
    j_e: float | None
    nu: int | None
    total: float | None
    iterations: int
    timings: dict[str, float]
    note: str = ""

    @property
    def plan_ms(self) -> float:
        return 1e3 * sum(self.timings.values())


@dataclass
class MissionMetrics:
    seed: int
    preset: str
    feasible: int
    times: list[float] = field(default_factory=list)
    coverage: list[float] = field(default_factory=list)
    distance: list[float] = field(default_factory=list)
    replans: list[ReplanRecord] = field(default_factory=list)
    trajectories: list[np.ndarray] = field(default_factory=list)
    status: str = "running"
    resolution: float = 1.0

    def _first(self, level: float, series: list[float]) -> float | None:
        for c, v in zip(self.coverage, series):
            if c >= level - 1e-12:
                return v
        return None

    @property
    def t_90(self):
        return self._first(0.9, self.times)

    @property
    def d_90(self):
        return self._first(0.9, self.distance)

    @property
    def t_100(self):
        return self._first(1.0, self.times)

    @property
    def d_100(self):
        return self._first(1.0, self.distance)

    @property
    def complete(self) -> bool:
        return bool(self.coverage) and self.coverage[-1] >= 1.0

    @property
    def n_replans(self) -> int:
        return len(self.replans)

    @property
    def mean_plan_ms(self) -> float:
        ms = [r.plan_ms for r in self.replans]
        return float(np.mean(ms)) if ms else 0.0

    @property
    def mean_speed(self) -> float:
        return self.distance[-1] / self.times[-1] if self.times and self.times[-1] > 0 else 0.0

    def volumetric_gain(self) -> np.ndarray:
        """(t, explored feasible volume in m^3) samples."""
        vol = np.asarray(self.coverage) * self.feasible * self.resolution ** 3
        return np.column_stack([self.times, vol])


class _Coverage:
    def __init__(self, feasible: np.ndarray, known: VoxelWorld):
        self.feasible = feasible
        self.total = int(np.count_nonzero(feasible & (known.labels == _UNK)))

    def __call__(self, known: VoxelWorld) -> float:
        if self.total == 0:
            return 1.0
        left = int(np.count_nonzero(self.feasible & (known.labels == _UNK)))
        return 1.0 - left / self.total


def run_mission(config: MissionConfig, truth: VoxelWorld | None = None,
                on_plan=None) -> MissionMetrics:
    """Explore until the feasible voxels are all known.

    ``on_plan(inputs)`` is called with every planner input before planning
    (used to audit what the planner sees).

    Raises
    ------
    MissionStalled
        Coverage did not grow over ``config.stall_limit`` consecutive replans;
        the partial metrics ride along on the exception.
    """
    truth = generate_world(config.world, config.seed) if truth is None else truth
    planner_sensor = config.planner.sensor
    discovery = planner_sensor.with_range(planner_sensor.range_m + config.discovery_margin)
    start = mission_start(truth)
    known = initial_known(truth, start, planner_sensor.range_m)
    discover(truth, known, start, discovery)
    feasible = feasible_mask(truth, planner_sensor)
    coverage = _Coverage(feasible, known)
    metrics = MissionMetrics(config.seed, config.preset, int(feasible.sum()),
                             resolution=truth.resolution)
    noise_rng = stream(config.seed, "noise")
    t = dist = 0.0
    position = start
    metrics.times.append(0.0)
    metrics.coverage.append(coverage(known))
    metrics.distance.append(0.0)
    stalled = 0
    for k in range(config.max_replans):
        if metrics.coverage[-1] >= 1.0:
            break
        inputs = config.planner.inputs(known.copy(), position, sub_seed(config.seed, "plan", k))
        if on_plan is not None:
            on_plan(inputs)
        before = metrics.coverage[-1]
        try:
            result = plan_with_retry(inputs)
        except ExplorationExhausted:
            break
        except NoCandidates as exc:
            metrics.replans.append(ReplanRecord(k, t, before, 0, 0, None, None, None, None, None,
                                                None, inputs.iterations, {}, str(exc)))
            stalled += 1
            if stalled >= config.stall_limit:
                metrics.status = "stalled"
                raise MissionStalled(f"seed {config.seed}: no progress in {stalled} replans",
                                     metrics)
            continue
        c = result.cost
        metrics.replans.append(ReplanRecord(
            k, t, before, len(result.candidates), sum(x.found for x in result.candidates),
            result.chosen, c.j_a, c.j_d, c.j_e, c.nu, c.total, result.iterations,
            dict(result.timings)))
        flown = track(result.x_min, config.speed, config.noise, noise_rng, config.dt)
        metrics.trajectories.append(result.x_min.points)
        for i in range(1, len(flown.times)):
            discover(truth, known, flown.reported[i], discovery)
            metrics.times.append(t + float(flown.times[i]))
            metrics.distance.append(dist + min(float(flown.times[i]) * config.speed, flown.distance))
            metrics.coverage.append(coverage(known))
        t += flown.elapsed
        dist += flown.distance
        position = flown.poses[-1]
        if metrics.coverage[-1] > before:
            stalled = 0
        else:
            stalled += 1
            if stalled >= config.stall_limit:
                metrics.status = "stalled"
                raise MissionStalled(f"seed {config.seed}: no progress in {stalled} replans",
                                     metrics)
    metrics.status = "complete" if metrics.complete else "step cap"
    return metrics


def run_batch(configs: list[MissionConfig]) -> list[MissionMetrics]:
    """Run missions in order; stalled missions contribute their partial metrics."""
    out = []
    for cfg in configs:
        t0 = time.perf_counter()
        try:
            m = run_mission(cfg)
        except MissionStalled as exc:
            m = exc.metrics
        log.info("seed %d %s: %s in %.1f s", cfg.seed, cfg.preset, m.status,
                 time.perf_counter() - t0)
        out.append(m)
    return out
