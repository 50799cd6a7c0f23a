"""Candidate pricing and the minimum-cost selection.

Each candidate trajectory is priced as ``J_a + J_d + J_e``:

* ``J_d = K_d * path length``
* ``J_a``: the input and input-rate terms of the NMPC objective evaluated on
  the predicted actuation
* ``J_e = -K_nu * nu`` with ``nu`` the number of distinct Unknown voxels seen
  from any point of the trajectory.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NoCandidates, OutOfBoundsError
from .nmpc import NmpcWeights
from .sensor import SensorModel, count_seen_unknowns
from .voxel_world import VoxelWorld

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CostGains:
    k_d: float = 2.0
    k_nu: float = 1.0

    def __post_init__(self):
        if not (self.k_d >= 0 and self.k_nu >= 0):
            raise ValueError(f"cost gains must be >= 0, got k_d={self.k_d}, k_nu={self.k_nu}")

    @classmethod
    def preset(cls, name: str) -> CostGains:
        try:
            return PRESETS[name]
        except KeyError:
            raise ValueError(f"unknown cost preset {name!r}; expected one of {sorted(PRESETS)}") from None


#: greedy favours information gain, conservative favours short, gentle paths
PRESETS = {
    "greedy": CostGains(k_d=2.0, k_nu=1.0),
    "conservative": CostGains(k_d=8.0, k_nu=2.0),
}


@dataclass(frozen=True)
class CostBreakdown:
    j_a: float
    j_d: float
    j_e: float
    nu: int

    @property
    def total(self) -> float:
        return self.j_a + self.j_d + self.j_e

    def as_dict(self) -> dict:
        return {"j_a": self.j_a, "j_d": self.j_d, "j_e": self.j_e, "nu": self.nu,
                "total": self.total}


def distance_cost(points, k_d: float) -> float:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 2:
        return 0.0
    return float(k_d * np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def actuation_cost(u_seq, weights: NmpcWeights) -> float:
    """Input and input-rate penalty of ``u_seq``; the first input's predecessor is ``u_ref``."""
    U = np.asarray(u_seq, dtype=np.float64).reshape(-1, 3)
    dev = weights.u_ref - U
    rate = np.diff(np.vstack([weights.u_ref, U]), axis=0)
    j_u = np.einsum("ji,ik,jk->", dev, weights.q_u, dev)
    j_du = np.einsum("ji,ik,jk->", rate, weights.q_du, rate)
    return float(j_u + j_du)


def information_gain(points, world: VoxelWorld, model: SensorModel) -> int:
    """Distinct Unknown voxels in clear sensor view from at least one point."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    for p in pts:
        if not world.in_bounds(p):
            raise OutOfBoundsError(f"trajectory point {p} outside grid")
    return count_seen_unknowns(pts, world, model)


def exploration_cost(nu: int, k_nu: float) -> float:
    return -float(k_nu) * float(nu)


def price(points, u_seq, world: VoxelWorld, model: SensorModel, gains: CostGains,
          weights: NmpcWeights) -> CostBreakdown:
    nu = information_gain(points, world, model)
    return CostBreakdown(actuation_cost(u_seq, weights), distance_cost(points, gains.k_d),
                         exploration_cost(nu, gains.k_nu), nu)


def select_min(costs: Sequence[CostBreakdown | None]) -> int:
    """Index of the cheapest candidate; ``None`` entries are unplanned goals.

    Candidates that see nothing new are dropped whenever another candidate
    does; if none does, the cheapest is still returned (and a warning
    logged).  Ties go to the lowest index.
    """
    valid = [i for i, c in enumerate(costs) if c is not None]
    if not valid:
        raise NoCandidates("no candidate trajectory to select from")
    informative = [i for i in valid if costs[i].nu > 0]
    if informative:
        pool = informative
    else:
        log.warning("no candidate sees an unknown voxel; taking the cheapest anyway")
        pool = valid
    best = pool[0]
    for i in pool[1:]:
        if costs[i].total < costs[best].total:
            best = i
    return best
