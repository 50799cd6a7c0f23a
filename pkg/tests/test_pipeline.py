from __future__ import annotations

import json

import numpy as np
import pytest

import errt.pipeline as pipeline
from errt.errors import ExplorationExhausted, NoCandidates, NonFinite, StartBlocked
from errt.pipeline import STAGES, PlannerInputs, plan, plan_with_retry
from errt.sim import WorldSpec, generate_world, initial_known, mission_start
from errt.voxel_world import BLOCK_NOT_FREE, Label

from conftest import open_world


@pytest.fixture(scope="module")
def partial_map():
    truth = generate_world(WorldSpec(), 3)
    start = mission_start(truth)
    return initial_known(truth, start, 6.0), start


def test_fully_explored_world_is_exhausted():
    with pytest.raises(ExplorationExhausted):
        plan(PlannerInputs(open_world(), (1.5, 1.5, 1.5)))


def test_start_must_be_known_free(partial_map):
    known, _ = partial_map
    with pytest.raises(StartBlocked):
        plan(PlannerInputs(known, (26.5, 26.5, 3.5)))


def test_plan_result_contract(partial_map):
    known, start = partial_map
    inputs = PlannerInputs(known, start, seed=5)
    res = plan(inputs)
    assert len(res.candidates) <= inputs.n_goal
    assert set(res.timings) == set(STAGES)
    chosen = res.candidates[res.chosen]
    assert chosen.found and res.x_min is chosen.trajectory
    assert np.linalg.norm(res.x_min.points[0] - start) <= known.resolution
    costs = [c.cost for c in res.candidates if c.cost is not None]
    pool = [c for c in costs if c.nu > 0] or costs
    assert chosen.cost.total == min(c.total for c in pool)
    for c in res.candidates:
        assert known.is_free(c.goal)
        if not c.found:
            continue
        pts = c.trajectory.points
        assert np.linalg.norm(np.diff(pts, axis=0), axis=1).max() <= 0.75 + 1e-9
        for a, b in zip(pts[:-1], pts[1:]):
            assert known.segment_free(a, b, BLOCK_NOT_FREE)
    json.loads(res.to_json())


def test_same_seed_same_result(partial_map):
    known, start = partial_map
    a = plan(PlannerInputs(known, start, seed=11))
    b = plan(PlannerInputs(known.copy(), start, seed=11))
    assert a.to_json(timings=False) == b.to_json(timings=False)


def test_full_state_input_accepted(partial_map):
    known, start = partial_map
    state = np.concatenate([start, [0.2, 0.0, 0.0, 0.0, 0.05]])
    assert plan(PlannerInputs(known, state, n_goal=10, seed=1)).x_min is not None
    with pytest.raises(ValueError):
        PlannerInputs(known, np.zeros(5))


def test_unreachable_goals_raise_no_candidates():
    w = open_world((8, 8, 3))
    for j in range(8):
        for k in range(3):
            w.set_label((4, j, k), Label.OCCUPIED)
    w.set_label((6, 4, 1), Label.UNKNOWN)
    with pytest.raises(NoCandidates):
        plan(PlannerInputs(w, (1.5, 1.5, 1.5), n_goal=5, iterations=200))


def test_faulting_solve_drops_only_that_candidate(partial_map, monkeypatch):
    known, start = partial_map
    real = pipeline.solve_for_trajectory
    calls = []

    def flaky(x0, points, weights, params):
        calls.append(1)
        if len(calls) == 1:
            raise NonFinite("boom")
        return real(x0, points, weights, params)

    monkeypatch.setattr(pipeline, "solve_for_trajectory", flaky)
    res = plan(PlannerInputs(known, start, seed=5))
    dropped = [c for c in res.candidates if c.note.startswith("nmpc")]
    assert len(dropped) == 1 and dropped[0].cost is None
    assert res.candidates[res.chosen].cost is not None


def test_retry_doubles_iterations_once(partial_map, monkeypatch):
    known, start = partial_map
    seen = []
    real = pipeline.plan

    def fail_first(inputs):
        seen.append(inputs.iterations)
        if len(seen) == 1:
            raise NoCandidates("nothing reached")
        return real(inputs)

    monkeypatch.setattr(pipeline, "plan", fail_first)
    res = plan_with_retry(PlannerInputs(known, start, iterations=700, seed=2))
    assert seen == [700, 1400] and res.iterations == 1400

    def always_fail(inputs):
        seen.append(inputs.iterations)
        raise NoCandidates("nothing reached")

    seen.clear()
    monkeypatch.setattr(pipeline, "plan", always_fail)
    with pytest.raises(NoCandidates):
        plan_with_retry(PlannerInputs(known, start, iterations=700))
    assert seen == [700, 1400]
