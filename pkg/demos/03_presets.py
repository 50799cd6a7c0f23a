"""Greedy against conservative tuning on the same worlds.

The greedy preset weights information gain more heavily against distance
and actuation.  This runs both presets on a few seeds and compares the
time to 90% and to full coverage.

    python demos/03_presets.py [n_seeds]
"""
from __future__ import annotations

import sys

from errt.config import load_config
from errt.errors import MissionStalled
from errt.sim import run_mission

n = int(sys.argv[1]) if len(sys.argv) > 1 else 3


def run(preset: str, seed: int):
    cfg = load_config(None, {"cost.preset": preset})
    try:
        return run_mission(cfg.mission(seed))
    except MissionStalled as exc:
        return exc.metrics


print(f"{'seed':>4} | {'greedy t90':>10} {'t100':>7} | {'conserv. t90':>12} {'t100':>7}")
wins = 0
for seed in range(1, n + 1):
    g, c = run("greedy", seed), run("conservative", seed)
    wins += g.t_90 < c.t_90
    print(f"{seed:4d} | {g.t_90:10.1f} {g.t_100:7.1f} | {c.t_90:12.1f} {c.t_100:7.1f}")
print(f"greedy reached 90% first on {wins} of {n} worlds")
