"""A full exploration mission, plan -> fly -> sense, until the cave is covered.

Prints the coverage milestones and writes the usual result files
(metrics.csv, coverage and plan-log CSVs, an SVG plot) to ``out_dir``.

    python demos/02_mission.py [seed] [greedy|conservative] [out_dir]
"""
from __future__ import annotations

import sys
import time

from errt.config import load_config
from errt.results import write_results
from errt.sim import run_mission

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
preset = sys.argv[2] if len(sys.argv) > 2 else "greedy"
out_dir = sys.argv[3] if len(sys.argv) > 3 else f"mission_{preset}_{seed}"

cfg = load_config(None, {"cost.preset": preset})
t0 = time.perf_counter()
m = run_mission(cfg.mission(seed))
wall = time.perf_counter() - t0

print(f"seed {seed}, {preset}: {m.status} after {m.n_replans} replans ({wall:.1f} s wall clock)")
print(f"feasible voxels: {m.feasible}")
print(f"90% coverage at t = {m.t_90:.1f} s after {m.d_90:.1f} m")
print(f"100% coverage at t = {m.t_100:.1f} s after {m.d_100:.1f} m")
print(f"share of time spent on the last 10%: {(m.t_100 - m.t_90) / m.t_100:.0%}")
print(f"mean planning time {m.mean_plan_ms:.0f} ms, mean speed {m.mean_speed:.2f} m/s")

for r in m.replans[:5]:
    print(f"  replan {r.replan}: t={r.t:6.1f} s coverage {r.coverage:.3f} "
          f"goals {r.n_goals} reached {r.n_found} nu {r.nu}")

paths = write_results([m], out_dir, cfg.to_text(), force=True)
print(f"wrote {len(paths)} files to {out_dir}/")
