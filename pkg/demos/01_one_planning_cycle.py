"""One planning cycle on a freshly generated cave.

The vehicle starts in a corner with only a 6 m ball of the map known.  The
planner samples goals that can see unknown space, grows one tree to all of
them, prices every reachable path and picks the cheapest.

    python demos/01_one_planning_cycle.py [seed]
"""
from __future__ import annotations

import sys

from errt.pipeline import PlannerInputs, plan
from errt.sim import WorldSpec, generate_world, initial_known, mission_start
from errt.voxel_world import Label

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1

truth = generate_world(WorldSpec(), seed)
start = mission_start(truth)
known = initial_known(truth, start, 6.0)
print(f"world {truth.dims}, {truth.count(Label.FREE)} free voxels; start {start}")
print(f"known map: {known.count(Label.FREE)} free, {known.count(Label.OCCUPIED)} occupied, "
      f"{known.count(Label.UNKNOWN)} unknown")

result = plan(PlannerInputs(known, start, seed=seed))

print(f"\n{'goal':>4} {'found':>5} {'length':>7} {'nu':>4} {'J_a':>8} {'J_d':>7} {'J_e':>8} {'total':>8}")
for c in result.candidates:
    if c.cost is None:
        print(f"{c.goal_index:4d} {str(c.found):>5} {'':>7} {c.note}")
        continue
    k = c.cost
    mark = "  <- chosen" if c.goal_index == result.chosen else ""
    print(f"{c.goal_index:4d} {str(c.found):>5} {c.trajectory.length:7.2f} {k.nu:4d} {k.j_a:8.2f} "
          f"{k.j_d:7.2f} {k.j_e:8.2f} {k.total:8.2f}{mark}")

print("\nstage timings: " + ", ".join(f"{s} {1e3 * t:.1f} ms" for s, t in result.timings.items()))
print(f"chosen path: {len(result.x_min)} points, {result.x_min.length:.2f} m")
