"""One planning cycle.

goals -> shared RRT* tree -> per-goal path (shortcut + resampled) ->
NMPC actuation -> cost -> minimum-cost trajectory.

The planner reads only the world it is handed (the known map), and every
random draw comes from streams split off ``inputs.seed``.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .cost import CostBreakdown, CostGains, price, select_min
from .dynamics import N_STATE, UavParams, position_state
from .errors import ExplorationExhausted, NoCandidates, NonFinite, StartBlocked
from .goals import generate_goals
from .nmpc import NmpcWeights, solve_for_trajectory
from .rrt import Trajectory, extract_chain, grow_tree, improve_path, interpolate
from .seeds import stream
from .sensor import SensorModel
from .voxel_world import Label, VoxelWorld

log = logging.getLogger(__name__)

STAGES = ("goals", "tree", "paths", "nmpc", "cost", "select")


@dataclass
class PlannerInputs:
    world: VoxelWorld
    state: np.ndarray
    n_goal: int = 40
    sensor: SensorModel = field(default_factory=SensorModel)
    gains: CostGains = field(default_factory=CostGains)
    weights: NmpcWeights = field(default_factory=NmpcWeights)
    iterations: int = 1500
    seed: int = 0
    interp_m: float = 0.75
    goal_radius_m: float | None = None
    step_max_factor: float = 2.0
    goal_attempt_factor: int = 200
    params: UavParams = field(default_factory=UavParams)

    def __post_init__(self):
        state = np.asarray(self.state, dtype=np.float64).ravel()
        if state.shape == (3,):
            state = position_state(state)
        if state.shape != (N_STATE,):
            raise ValueError("state must be a 3D position or a full 8-state")
        self.state = state
        if self.n_goal < 1:
            raise ValueError("n_goal must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    @property
    def position(self) -> np.ndarray:
        return self.state[:3]


@dataclass(frozen=True)
class PlannerSettings:
    """Everything :class:`PlannerInputs` holds besides the map, state and seed."""
    n_goal: int = 40
    sensor: SensorModel = field(default_factory=SensorModel)
    gains: CostGains = field(default_factory=CostGains)
    weights: NmpcWeights = field(default_factory=NmpcWeights)
    iterations: int = 1500
    interp_m: float = 0.75
    goal_radius_m: float | None = None
    step_max_factor: float = 2.0
    goal_attempt_factor: int = 200
    params: UavParams = field(default_factory=UavParams)

    def inputs(self, world: VoxelWorld, state, seed: int) -> PlannerInputs:
        return PlannerInputs(world, state, self.n_goal, self.sensor, self.gains, self.weights,
                             self.iterations, seed, self.interp_m, self.goal_radius_m,
                             self.step_max_factor, self.goal_attempt_factor, self.params)


@dataclass
class Candidate:
    goal_index: int
    goal: np.ndarray
    found: bool
    trajectory: Trajectory | None = None
    cost: CostBreakdown | None = None
    solver_iterations: int = 0
    converged: bool = False
    objective: float | None = None
    note: str = ""

    def to_dict(self) -> dict:
        d = {
            "goal_index": self.goal_index,
            "goal": self.goal.tolist(),
            "found": self.found,
            "note": self.note,
            "solver_iterations": self.solver_iterations,
            "converged": self.converged,
            "objective": self.objective,
            "cost": None if self.cost is None else self.cost.as_dict(),
            "n_points": 0 if self.trajectory is None else len(self.trajectory),
        }
        return d


@dataclass
class PlanResult:
    x_min: Trajectory
    chosen: int
    candidates: list[Candidate]
    timings: dict[str, float]
    iterations: int
    seed: int

    @property
    def cost(self) -> CostBreakdown:
        return self.candidates[self.chosen].cost

    @property
    def plan_ms(self) -> float:
        return 1e3 * sum(self.timings.values())

    def to_dict(self, timings: bool = True) -> dict:
        d = {
            "seed": self.seed,
            "iterations": self.iterations,
            "chosen": self.chosen,
            "x_min": {"points": self.x_min.points.tolist(), "spacing": self.x_min.spacing,
                      "goal_index": self.x_min.goal_index},
            "candidates": [c.to_dict() for c in self.candidates],
        }
        if timings:
            d["timings_s"] = dict(self.timings)
        return d

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=1)


def plan(inputs: PlannerInputs) -> PlanResult:
    """Run one planning cycle and return the minimum-cost trajectory.

    Raises
    ------
    ExplorationExhausted
        The world has no Unknown voxels left.
    StartBlocked
        The vehicle is not in a known-free voxel.
    NoCandidates
        No goal could be sampled or none was reached by the tree.
    """
    world = inputs.world
    timings = {s: 0.0 for s in STAGES}
    if world.count(Label.UNKNOWN) == 0:
        raise ExplorationExhausted("no unknown voxels left")
    start = inputs.position
    if not world.is_free(start):
        raise StartBlocked(f"vehicle position {start} is not in a known-free voxel")

    t0 = time.perf_counter()
    goal_set = generate_goals(world, inputs.sensor, inputs.n_goal, stream(inputs.seed, "goals"),
                              max_attempts=inputs.goal_attempt_factor * inputs.n_goal)
    timings["goals"] = time.perf_counter() - t0
    if len(goal_set) == 0:
        raise NoCandidates(f"no goal found in {goal_set.attempts} attempts")

    t0 = time.perf_counter()
    tree = grow_tree(world, start, goal_set.goals, inputs.iterations,
                     stream(inputs.seed, "tree", inputs.iterations),
                     goal_radius=inputs.goal_radius_m,
                     step_max=inputs.step_max_factor * world.resolution)
    timings["tree"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    candidates = []
    for g, goal in enumerate(goal_set.goals):
        chain = extract_chain(tree, goal_set.goals, g)
        if chain is None:
            candidates.append(Candidate(g, goal, False, note="not reached"))
            continue
        traj = interpolate(improve_path(chain, world), inputs.interp_m, goal_index=g)
        candidates.append(Candidate(g, goal, True, traj))
    timings["paths"] = time.perf_counter() - t0
    if not any(c.found for c in candidates):
        raise NoCandidates(f"none of {len(candidates)} goals reached in {inputs.iterations} iterations")

    t0 = time.perf_counter()
    actuation = {}
    for c in candidates:
        if not c.found:
            continue
        try:
            sol = solve_for_trajectory(inputs.state, c.trajectory.points, inputs.weights, inputs.params)
        except NonFinite as exc:
            c.note = f"nmpc: {exc}"
            continue
        actuation[c.goal_index] = sol.u_seq
        c.solver_iterations = sol.iterations
        c.converged = sol.converged
        c.objective = sol.objective
    timings["nmpc"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    for c in candidates:
        if c.goal_index in actuation:
            c.cost = price(c.trajectory.points, actuation[c.goal_index], world, inputs.sensor,
                           inputs.gains, inputs.weights)
    timings["cost"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    chosen = select_min([c.cost for c in candidates])
    timings["select"] = time.perf_counter() - t0
    return PlanResult(candidates[chosen].trajectory, chosen, candidates, timings,
                      inputs.iterations, inputs.seed)


def plan_with_retry(inputs: PlannerInputs) -> PlanResult:
    """:func:`plan`, retried once with twice the tree iterations on NoCandidates."""
    try:
        return plan(inputs)
    except NoCandidates as exc:
        log.info("replanning with %d iterations: %s", 2 * inputs.iterations, exc)
        return plan(replace(inputs, iterations=2 * inputs.iterations))
