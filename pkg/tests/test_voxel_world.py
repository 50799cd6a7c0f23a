from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from errt.errors import OutOfBoundsError, ParseError
from errt.voxel_world import (BLOCK_NOT_FREE, BLOCK_OCCUPIED, Label, VoxelWorld, load_world,
                              parse_world, save_world)

from conftest import open_world, random_world, sampled_voxels


def _slab_hits(world: VoxelWorld, a, b) -> set[tuple[int, int, int]]:
    """Exact oracle: voxels whose open box the segment passes through."""
    a = np.asarray(a, float)
    d = np.asarray(b, float) - a
    hits = set()
    for idx in np.ndindex(*world.dims):
        lo = world.origin + np.asarray(idx) * world.resolution
        hi = lo + world.resolution
        t0, t1 = 0.0, 1.0
        for ax in range(3):
            if d[ax] == 0.0:
                if not lo[ax] < a[ax] < hi[ax]:
                    t0, t1 = 1.0, 0.0
                continue
            ta, tb = (lo[ax] - a[ax]) / d[ax], (hi[ax] - a[ax]) / d[ax]
            t0, t1 = max(t0, min(ta, tb)), min(t1, max(ta, tb))
        if t0 < t1 or (t0 == t1 == 0.0 and world.index_of(a) == idx):
            hits.add(idx)
    return hits


def test_voxel_state_examples():
    w = open_world()
    assert w.voxel_state((5.0, 5.0, 5.0)) == Label.FREE
    assert w.voxel_state((11.0, 11.0, 11.0)) == Label.OUT_OF_BOUNDS
    w.set_label((2, 0, 0), Label.OCCUPIED)
    assert w.voxel_state(w.center((2, 0, 0))) == Label.OCCUPIED


def test_faces_resolve_to_lower_index():
    w = open_world()
    assert w.index_of((1.0, 0.5, 0.5)) == (0, 0, 0)
    assert w.index_of((0.0, 0.0, 0.0)) == (0, 0, 0)
    assert w.index_of((10.0, 10.0, 10.0)) == (9, 9, 9)


def test_center_round_trips():
    w = VoxelWorld((4, 5, 6), 0.5, (-1.0, 2.0, 0.25))
    for idx in np.ndindex(*w.dims):
        assert w.index_of(w.center(idx)) == idx


def test_labels_partition_and_binary_grid(rng):
    w = random_world(rng, (6, 7, 5))
    assert w.count(Label.FREE) + w.count(Label.OCCUPIED) + w.count(Label.UNKNOWN) == 6 * 7 * 5
    assert np.array_equal(w.binary_grid() == 1, w.labels != int(Label.FREE))


def test_rejects_bad_dims():
    with pytest.raises(ValueError):
        VoxelWorld((0, 3, 3))
    with pytest.raises(ValueError):
        VoxelWorld((3, 3, 3), resolution=0.0)


def test_segment_free_examples():
    w = open_world()
    assert w.segment_free((0.2, 0.3, 0.4), (9.9, 8.1, 7.7))
    assert w.segment_free((3.5, 3.5, 3.5), (3.5, 3.5, 3.5))
    w.set_label((2, 0, 0), Label.OCCUPIED)
    assert not w.segment_free((0.5, 0.5, 0.5), (4.5, 0.5, 0.5), BLOCK_OCCUPIED)


def test_segment_out_of_bounds_is_an_error():
    with pytest.raises(OutOfBoundsError):
        open_world().segment_free((0.5, 0.5, 0.5), (10.5, 0.5, 0.5))


def test_skip_voxel_never_blocks():
    w = open_world()
    w.set_label((4, 0, 0), Label.UNKNOWN)
    a, b = (0.5, 0.5, 0.5), w.center((4, 0, 0))
    assert not w.segment_free(a, b, BLOCK_NOT_FREE)
    assert w.segment_free(a, b, BLOCK_NOT_FREE, skip=(4, 0, 0))


def _random_segments(rng, n, dims):
    hi = np.asarray(dims, float)
    return rng.uniform(0.0, hi, size=(n, 2, 3))


def test_segment_free_matches_fine_step_oracle():
    """1000 random segment/obstacle configurations against sampling at res/100."""
    rng = np.random.default_rng(7)
    disagree = 0
    for trial in range(1000):
        w = random_world(rng, (6, 6, 4), p_occ=0.08, p_unk=0.0)
        a, b = _random_segments(rng, 1, w.dims)[0]
        hit = sampled_voxels(w, a, b, w.resolution / 100)
        oracle = not any(w.labels[i] == Label.OCCUPIED for i in hit)
        disagree += w.segment_free(a, b, BLOCK_OCCUPIED) != oracle
    assert disagree == 0


def test_segment_free_matches_exact_slab_oracle():
    rng = np.random.default_rng(8)
    for trial in range(300):
        w = random_world(rng, (5, 5, 4), p_occ=0.1, p_unk=0.1)
        a, b = _random_segments(rng, 1, w.dims)[0]
        hits = _slab_hits(w, a, b)
        oracle = not any(w.labels[i] != Label.FREE for i in hits)
        assert w.segment_free(a, b, BLOCK_NOT_FREE) == oracle


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_segment_free_is_symmetric(seed):
    rng = np.random.default_rng(seed)
    w = random_world(rng, (6, 5, 4), p_occ=0.1, p_unk=0.1)
    a, b = _random_segments(rng, 1, w.dims)[0]
    for blocking in (BLOCK_OCCUPIED, BLOCK_NOT_FREE):
        assert w.segment_free(a, b, blocking) == w.segment_free(b, a, blocking)


def test_last_write_wins():
    w = open_world()
    w.set_label((1, 2, 3), Label.FREE)
    w.set_label((1, 2, 3), Label.OCCUPIED)
    assert w.voxel_state(w.center((1, 2, 3))) == Label.OCCUPIED
    with pytest.raises(OutOfBoundsError):
        w.set_label((10, 0, 0), Label.FREE)


def test_unknown_voxels_order():
    w = open_world((4, 4, 4))
    assert w.unknown_voxels() == []
    for idx in [(3, 0, 1), (0, 2, 2), (0, 2, 1)]:
        w.set_label(idx, Label.UNKNOWN)
    assert [v.index for v in w.unknown_voxels()] == [(0, 2, 1), (0, 2, 2), (3, 0, 1)]
    assert len(VoxelWorld((3, 4, 5)).unknown_voxels()) == 60


def test_world_file_round_trip(tmp_path, rng):
    w = random_world(rng, (5, 6, 3), res=0.5)
    path = tmp_path / "w.txt"
    save_world(w, path)
    back = load_world(path)
    assert back.dims == w.dims and back.resolution == w.resolution
    assert np.array_equal(back.labels, w.labels)
    save_world(w, path, default=Label.UNKNOWN)
    assert np.array_equal(load_world(path).labels, w.labels)


def test_world_file_default_is_unknown_when_asked():
    w = parse_world("dims 2 2 2\nres 1\ndefault unk\nfree 0 0 0  # start\nocc 1 1 1\n")
    assert w.count(Label.UNKNOWN) == 6
    assert w.labels[0, 0, 0] == Label.FREE and w.labels[1, 1, 1] == Label.OCCUPIED


@pytest.mark.parametrize("text, line", [
    ("dims 2 2 2\nocc 5 0 0\n", 2),
    ("dims 2 2 2\nwall 0 0 0\n", 2),
    ("dims 2 2 2\nres x\n", 2),
])
def test_world_file_errors_carry_line(text, line):
    with pytest.raises(ParseError) as err:
        parse_world(text)
    assert err.value.line == line


def test_world_file_needs_dims():
    with pytest.raises(ParseError):
        parse_world("res 1\n")
