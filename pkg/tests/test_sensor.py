from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from errt.errors import OutOfBoundsError
from errt.sensor import SensorModel, in_sensor_view, visible_unknowns
from errt.voxel_world import BLOCK_NOT_FREE, Label, VoxelWorld

from conftest import open_world, random_world

MODEL = SensorModel.from_degrees(6.0, 32.0, 0.1)


def _inequalities(v, t, m: SensorModel) -> bool:
    dx, dy, dz = np.asarray(v, float) - np.asarray(t, float)
    horiz = math.hypot(dx, dy)
    return m.range_m >= horiz and abs(dz) <= horiz * math.tan(m.fov_rad / 2) + m.array_m / 2


def test_in_sensor_view_examples():
    assert in_sensor_view((0, 0, 0), (3, 0, 0), MODEL)
    assert 3 * math.tan(math.radians(16)) + 0.05 == pytest.approx(0.910, abs=1e-3)
    assert not in_sensor_view((0, 0, 0), (3, 0, 1), MODEL)
    assert in_sensor_view((1, 2, 3), (1, 2, 3), MODEL)


def test_range_is_inclusive():
    assert in_sensor_view((0, 0, 0), (6.0, 0, 0), MODEL)
    assert not in_sensor_view((0, 0, 0), (6.0 + 1e-9, 0, 0), MODEL)


@pytest.mark.parametrize("kwargs", [dict(range_m=0.0), dict(fov_rad=0.0), dict(fov_rad=math.pi),
                                    dict(array_m=-0.1)])
def test_model_invariants(kwargs):
    with pytest.raises(ValueError):
        SensorModel(**kwargs)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-8, 8), min_size=6, max_size=6), st.floats(0, 2 * math.pi))
def test_yaw_symmetric(coords, angle):
    v, t = np.array(coords[:3]), np.array(coords[3:])
    d = t - v
    c, s = math.cos(angle), math.sin(angle)
    rotated = v + np.array([c * d[0] - s * d[1], s * d[0] + c * d[1], d[2]])
    a, b = _inequalities(v, t, MODEL), _inequalities(v, rotated, MODEL)
    horiz = math.hypot(d[0], d[1])
    margin = min(abs(MODEL.range_m - horiz),
                 abs(abs(d[2]) - horiz * MODEL.tan_half_fov - MODEL.array_m / 2))
    if margin > 1e-9:
        assert in_sensor_view(v, t, MODEL) == in_sensor_view(v, rotated, MODEL) == a == b


def test_visible_unknowns_examples():
    w = open_world((10, 3, 3))
    vp = (1.5, 1.5, 1.5)
    assert visible_unknowns(vp, w, MODEL) == []
    w.set_label((4, 1, 1), Label.UNKNOWN)
    assert [v.index for v in visible_unknowns(vp, w, MODEL)] == [(4, 1, 1)]
    w.set_label((2, 1, 1), Label.OCCUPIED)
    assert visible_unknowns(vp, w, MODEL) == []


def test_unknown_blocks_other_unknowns():
    w = open_world((10, 3, 3))
    w.set_label((3, 1, 1), Label.UNKNOWN)
    w.set_label((6, 1, 1), Label.UNKNOWN)
    assert [v.index for v in visible_unknowns((0.5, 1.5, 1.5), w, MODEL)] == [(3, 1, 1)]


def test_viewpoint_out_of_bounds():
    with pytest.raises(OutOfBoundsError):
        visible_unknowns((-1.0, 0.5, 0.5), open_world(), MODEL)


def _brute_visible(world: VoxelWorld, vp, model) -> set:
    out = set()
    for ref in world.unknown_voxels():
        if _inequalities(vp, ref.center, model) and world.segment_free(
                vp, ref.center, BLOCK_NOT_FREE, skip=ref.index):
            out.add(ref.index)
    return out


def test_visible_unknowns_match_independent_recheck():
    rng = np.random.default_rng(3)
    for _ in range(60):
        w = random_world(rng, (8, 8, 4), p_occ=0.1, p_unk=0.3)
        vp = rng.uniform(0, w.upper)
        got = {v.index for v in visible_unknowns(vp, w, MODEL)}
        assert got <= {v.index for v in w.unknown_voxels()}
        assert got == _brute_visible(w, vp, MODEL)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.0, 6.0), st.floats(0.0, 4.0),
       st.floats(5.0, 60.0), st.floats(0.0, 60.0))
def test_visibility_monotone_in_range_and_fov(seed, r, dr, fov, dfov):
    rng = np.random.default_rng(seed)
    w = random_world(rng, (8, 8, 4), p_occ=0.1, p_unk=0.3)
    vp = rng.uniform(0, w.upper)
    small = SensorModel.from_degrees(r, fov, 0.1)
    big = SensorModel.from_degrees(r + dr, min(fov + dfov, 179.0), 0.1)
    a = {v.index for v in visible_unknowns(vp, w, small)}
    b = {v.index for v in visible_unknowns(vp, w, big)}
    assert a <= b
