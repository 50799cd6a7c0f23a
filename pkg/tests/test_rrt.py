from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from errt.errors import StartBlocked
from errt.rrt import Trajectory, extract_chain, grow_tree, improve_path, interpolate
from errt.voxel_world import BLOCK_NOT_FREE, Label, VoxelWorld

from conftest import open_world, random_world


def _maze() -> VoxelWorld:
    """A 12x12x3 room split by a wall with one door."""
    w = open_world((12, 12, 3))
    for j in range(12):
        if j not in (9, 10):
            for k in range(3):
                w.set_label((6, j, k), Label.OCCUPIED)
    for i in range(12):
        w.set_label((i, 4, 2), Label.UNKNOWN)
    return w


def _assert_tree_valid(world, result):
    t = result.tree
    assert t.parents[0] == -1 and t.costs[0] == 0.0
    for n in range(1, len(t)):
        p = t.parents[n]
        assert 0 <= p < len(t)
        assert world.segment_free(t.positions[p], t.positions[n], BLOCK_NOT_FREE)
        step = np.linalg.norm(t.positions[n] - t.positions[p])
        assert t.costs[n] == pytest.approx(t.costs[p] + step, abs=1e-9)
        assert t.costs[n] >= t.costs[p]


def test_start_must_be_free(rng):
    w = open_world()
    w.set_label((0, 0, 0), Label.OCCUPIED)
    with pytest.raises(StartBlocked):
        grow_tree(w, (0.5, 0.5, 0.5), [(5.5, 5.5, 5.5)], 10, rng)


def test_tree_edges_are_collision_free_and_costs_consistent():
    w = _maze()
    res = grow_tree(w, (1.5, 1.5, 1.5), [(10.5, 1.5, 1.5)], 1500, np.random.default_rng(4))
    _assert_tree_valid(w, res)
    assert res.best_nodes[0] is not None


def test_sealed_goals_are_never_reached(rng):
    w = open_world((10, 10, 3))
    for j in range(10):
        for k in range(3):
            w.set_label((5, j, k), Label.OCCUPIED)
    res = grow_tree(w, (1.5, 1.5, 1.5), [(8.5, 8.5, 1.5), (7.5, 2.5, 0.5)], 800, rng)
    assert res.best_nodes == [None, None]


def test_one_reachable_one_sealed(rng):
    w = open_world((10, 10, 3))
    for i, j in [(7, 6), (7, 7), (7, 8), (8, 6), (8, 8), (9, 6), (9, 8), (8, 9), (9, 9), (7, 9)]:
        for k in range(3):
            w.set_label((i, j, k), Label.OCCUPIED)
    for k in (0, 2):
        w.set_label((8, 7, k), Label.OCCUPIED)
        w.set_label((9, 7, k), Label.OCCUPIED)
    res = grow_tree(w, (1.5, 1.5, 1.5), [(3.5, 3.5, 1.5), (8.5, 7.5, 1.5)], 1500, rng)
    # the second pocket is closed on every side except +x, which is the grid boundary
    assert res.best_nodes[0] is not None and res.best_nodes[1] is None


def test_single_goal_two_metres_away():
    w = open_world((10, 10, 4))
    start, goal = np.array([4.5, 4.5, 1.5]), np.array([6.5, 4.5, 1.5])
    ok = 0
    for seed in range(100):
        res = grow_tree(w, start, [goal], 1500, np.random.default_rng(seed))
        chain = extract_chain(res, [goal], 0)
        if chain is not None and Trajectory(chain, 1.0).length <= 4.0:
            ok += 1
    assert ok >= 99


def test_same_seed_same_tree():
    w = _maze()
    a = grow_tree(w, (1.5, 1.5, 1.5), [(10.5, 1.5, 1.5)], 600, np.random.default_rng(2))
    b = grow_tree(w, (1.5, 1.5, 1.5), [(10.5, 1.5, 1.5)], 600, np.random.default_rng(2))
    assert np.array_equal(a.tree.positions, b.tree.positions)
    assert np.array_equal(a.tree.parents, b.tree.parents)
    assert a.best_nodes == b.best_nodes


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(100, 800), st.integers(1, 800))
def test_more_iterations_never_raise_best_cost(seed, n, extra):
    w = _maze()
    goals = [(10.5, 1.5, 1.5), (3.5, 10.5, 0.5), (10.5, 10.5, 2.5)]
    a = grow_tree(w, (1.5, 1.5, 1.5), goals, n, np.random.default_rng(seed))
    b = grow_tree(w, (1.5, 1.5, 1.5), goals, n + extra, np.random.default_rng(seed))
    for ca, cb in zip(a.best_costs, b.best_costs):
        if ca is not None:
            assert cb is not None and cb <= ca + 1e-9


def test_extract_chain_ends_at_goal():
    w = _maze()
    goal = np.array([10.5, 1.5, 1.5])
    res = grow_tree(w, (1.5, 1.5, 1.5), [goal], 1500, np.random.default_rng(0))
    chain = extract_chain(res, [goal], 0)
    assert np.array_equal(chain[0], [1.5, 1.5, 1.5]) and np.array_equal(chain[-1], goal)


def test_improve_path_collinear():
    w = open_world()
    chain = np.array([[0.5 + i, 0.5, 0.5] for i in range(6)])
    out = improve_path(chain, w)
    assert np.array_equal(out, chain[[0, -1]])


def test_improve_path_keeps_needed_corner():
    w = open_world((6, 6, 1))
    for i in range(0, 5):
        for j in range(1, 6):
            w.set_label((i, j, 0), Label.OCCUPIED)
    # L through the free strip: along y=0 row then up the x=5 column
    chain = np.array([[0.5, 0.5, 0.5], [5.5, 0.5, 0.5], [5.5, 5.5, 0.5]])
    assert not w.segment_free(chain[0], chain[2], BLOCK_NOT_FREE)
    assert len(improve_path(chain, w)) == 3


def test_improve_path_output_is_valid_on_random_trees():
    rng = np.random.default_rng(11)
    for _ in range(10):
        w = random_world(rng, (10, 10, 4), p_occ=0.1, p_unk=0.1)
        w.set_label((0, 0, 0), Label.FREE)
        free = np.argwhere(w.labels == Label.FREE)
        goals = w.centers(free[rng.choice(len(free), 5)])
        res = grow_tree(w, (0.5, 0.5, 0.5), goals, 800, rng)
        for g in range(len(goals)):
            chain = extract_chain(res, goals, g)
            if chain is None:
                continue
            out = improve_path(chain, w)
            assert len(out) <= len(chain)
            assert np.array_equal(out[0], chain[0]) and np.array_equal(out[-1], chain[-1])
            for a, b in zip(out[:-1], out[1:]):
                assert w.segment_free(a, b, BLOCK_NOT_FREE)


def test_interpolate_examples():
    t = interpolate(np.array([[0.0, 0, 0], [3.0, 0, 0]]), 0.75)
    assert len(t) == 5 and np.allclose(np.diff(t.points[:, 0]), 0.75)
    assert len(interpolate(np.array([[0.0, 0, 0], [0.5, 0, 0]]), 0.75)) == 2
    assert len(interpolate(np.array([[1.0, 2, 3], [1.0, 2, 3]]), 0.75)) == 1
    with pytest.raises(ValueError):
        interpolate(np.zeros((2, 3)), 0.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(*[st.floats(-10, 10)] * 3), min_size=1, max_size=8),
       st.floats(0.1, 2.0))
def test_interpolate_spacing_and_endpoints(chain, spacing):
    chain = np.array(chain)
    t = interpolate(chain, spacing)
    assert np.array_equal(t.points[0], chain[0]) and np.array_equal(t.points[-1], chain[-1])
    if len(t) > 1:
        assert np.linalg.norm(np.diff(t.points, axis=0), axis=1).max() <= spacing + 1e-9
    assert math.isclose(t.length, Trajectory(chain, spacing).length, rel_tol=1e-9, abs_tol=1e-9)
