from __future__ import annotations

import numpy as np

from errt.seeds import stream, sub_seed


def test_streams_are_reproducible_and_distinct():
    a = stream(7, "goals").random(5)
    assert np.array_equal(a, stream(7, "goals").random(5))
    assert not np.array_equal(a, stream(7, "tree").random(5))
    assert not np.array_equal(a, stream(8, "goals").random(5))
    assert not np.array_equal(stream(7, "plan", 1).random(5), stream(7, "plan", 2).random(5))


def test_sub_seed_is_a_stable_63_bit_integer():
    s = sub_seed(3, "plan", 4)
    assert s == sub_seed(3, "plan", 4) and 0 <= s < 2**63
    assert len({sub_seed(3, "plan", k) for k in range(200)}) == 200
