from __future__ import annotations

import numpy as np
import pytest

from errt.voxel_world import Label, VoxelWorld


def open_world(dims=(10, 10, 10), res=1.0, origin=(0.0, 0.0, 0.0)) -> VoxelWorld:
    return VoxelWorld(dims, res, origin, fill=Label.FREE)


def random_world(rng: np.random.Generator, dims, p_occ=0.15, p_unk=0.15, res=1.0) -> VoxelWorld:
    draw = rng.random(dims)
    labels = np.full(dims, int(Label.FREE), np.int8)
    labels[draw < p_occ] = int(Label.OCCUPIED)
    labels[(draw >= p_occ) & (draw < p_occ + p_unk)] = int(Label.UNKNOWN)
    return VoxelWorld.from_labels(labels, res)


def sampled_voxels(world: VoxelWorld, a, b, step: float) -> set[tuple[int, int, int]]:
    """Voxels hit by points spaced ``step`` apart along a -> b (endpoints included)."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    n = max(1, int(np.ceil(np.linalg.norm(b - a) / step)))
    return {world.index_of(a + (b - a) * t) for t in np.linspace(0.0, 1.0, n + 1)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
