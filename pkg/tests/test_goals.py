from __future__ import annotations

import math

import numpy as np
import pytest

from errt.errors import ExplorationExhausted
from errt.goals import generate_goals
from errt.sensor import SensorModel, in_sensor_view
from errt.voxel_world import BLOCK_NOT_FREE, Label

from conftest import open_world, random_world

MODEL = SensorModel.from_degrees(6.0, 32.0, 0.1)


def _check(world, gs):
    for goal, witness in zip(gs.goals, gs.witnesses):
        assert world.in_bounds(goal)
        assert world.is_free(goal)
        assert world.labels[witness.index] == Label.UNKNOWN
        assert in_sensor_view(goal, witness.center, MODEL)
        assert world.segment_free(goal, witness.center, BLOCK_NOT_FREE, skip=witness.index)


def test_fully_discovered_world_is_exhausted(rng):
    with pytest.raises(ExplorationExhausted):
        generate_goals(open_world(), MODEL, 5, rng)


def test_single_unknown_in_open_space(rng):
    w = open_world((12, 12, 4))
    w.set_label((6, 6, 2), Label.UNKNOWN)
    gs = generate_goals(w, MODEL, 5, rng)
    assert len(gs) == 5
    _check(w, gs)
    c = w.center((6, 6, 2))
    assert all(math.hypot(*(g[:2] - c[:2])) <= 6.0 for g in gs.goals)


def test_evaluation_goal_count_bounded(rng):
    w = random_world(rng, (27, 27, 4), p_occ=0.1, p_unk=0.5)
    gs = generate_goals(w, MODEL, 40, rng)
    assert len(gs) <= 40
    _check(w, gs)


def test_budget_limits_attempts(rng):
    w = open_world((20, 20, 4))
    w.set_label((0, 0, 0), Label.UNKNOWN)
    gs = generate_goals(w, MODEL, 40, rng, max_attempts=50)
    assert gs.attempts == 50 and len(gs) < 40
    _check(w, gs)


def test_same_seed_same_goals():
    w = random_world(np.random.default_rng(1), (15, 15, 4), p_occ=0.1, p_unk=0.4)
    a = generate_goals(w, MODEL, 20, np.random.default_rng(99))
    b = generate_goals(w, MODEL, 20, np.random.default_rng(99))
    assert np.array_equal(a.goals, b.goals)
    assert [r.index for r in a.witnesses] == [r.index for r in b.witnesses]


def test_every_goal_revalidates_on_random_worlds():
    rng = np.random.default_rng(5)
    for _ in range(30):
        w = random_world(rng, (10, 10, 4), p_occ=0.15, p_unk=0.3)
        _check(w, generate_goals(w, MODEL, 10, rng))
