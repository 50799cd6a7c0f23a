"""Mission output files.

``metrics.csv``
    one row per mission: seed, preset, t_90, d_90, t_100, d_100, replans,
    mean_plan_ms (wall clock, so left empty unless asked for, which keeps
    the file byte-identical across reruns)
``coverage_<seed>.csv``
    t, coverage, distance at every pose sample
``plan_log_<seed>.csv``
    per-replan chosen-candidate costs and stage timings
``coverage_<seed>.svg``
    optional coverage-vs-time plot
``config.resolved.txt``
    every effective configuration value (``config.resolved.<preset>.txt``
    per preset when a batch mixes presets)

When a batch mixes presets the per-mission files are named
``<kind>_<preset>_<seed>``.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

from .pipeline import STAGES
from .sim import MissionMetrics

METRICS_COLUMNS = ("seed", "preset", "t_90", "d_90", "t_100", "d_100", "replans", "mean_plan_ms")
COVERAGE_COLUMNS = ("t", "coverage", "distance")
PLAN_LOG_COLUMNS = ("replan", "t", "coverage", "n_goals", "n_found", "chosen", "j_a", "j_d",
                    "j_e", "nu", "total", "iterations",
                    *(f"{s}_ms" for s in STAGES), "plan_ms", "note")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def ordered(metrics: Sequence[MissionMetrics]) -> list[MissionMetrics]:
    return sorted(metrics, key=lambda m: (m.preset, m.seed))


def metrics_rows(metrics: Sequence[MissionMetrics], wall_clock: bool = False) -> list[tuple]:
    return [(m.seed, m.preset, m.t_90, m.d_90, m.t_100, m.d_100, m.n_replans,
             m.mean_plan_ms if wall_clock else None) for m in ordered(metrics)]


def coverage_svg(m: MissionMetrics, width: int = 480, height: int = 300) -> str:
    """Coverage against simulated time as a standalone SVG line plot."""
    pad = 40
    t_end = max(m.times[-1], 1e-9) if m.times else 1.0
    xs = [pad + (width - 2 * pad) * t / t_end for t in m.times]
    ys = [height - pad - (height - 2 * pad) * c for c in m.coverage]
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    y90 = height - pad - (height - 2 * pad) * 0.9
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>\n'
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>\n'
        f'<line x1="{pad}" y1="{y90:.2f}" x2="{width - pad}" y2="{y90:.2f}" stroke="#bbb" stroke-dasharray="4"/>\n'
        f'<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{pts}"/>\n'
        f'<text x="{width / 2}" y="{height - 8}" font-size="12" text-anchor="middle">time [s] (0 to {t_end:.1f})</text>\n'
        f'<text x="12" y="{height / 2}" font-size="12" transform="rotate(-90 12 {height / 2})" text-anchor="middle">coverage</text>\n'
        f'<text x="{width / 2}" y="20" font-size="13" text-anchor="middle">seed {m.seed}, {m.preset}</text>\n'
        "</svg>\n"
    )


def write_results(metrics: Sequence[MissionMetrics], out_dir,
                  config_text: str | dict[str, str] | None = None,
                  force: bool = False, svg: bool = True, wall_clock: bool = False) -> list[Path]:
    """Write every output file for a batch; returns the paths written.

    Refuses to touch a directory that already holds results unless
    ``force`` is set.
    """
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not force:
        raise FileExistsError(f"{out} already contains files; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "metrics.csv"
    _write_csv(path, METRICS_COLUMNS, metrics_rows(metrics, wall_clock))
    written.append(path)

    mixed = len({m.preset for m in metrics}) > 1
    for m in ordered(metrics):
        stem = f"{m.preset}_{m.seed}" if mixed else f"{m.seed}"
        path = out / f"coverage_{stem}.csv"
        _write_csv(path, COVERAGE_COLUMNS, zip(m.times, m.coverage, m.distance))
        written.append(path)
        path = out / f"plan_log_{stem}.csv"
        rows = []
        for r in m.replans:
            stage_ms = [1e3 * r.timings[s] if s in r.timings else None for s in STAGES]
            rows.append((r.replan, r.t, r.coverage, r.n_goals, r.n_found, r.chosen, r.j_a, r.j_d,
                         r.j_e, r.nu, r.total, r.iterations, *stage_ms, r.plan_ms, r.note))
        _write_csv(path, PLAN_LOG_COLUMNS, rows)
        written.append(path)
        if svg:
            path = out / f"coverage_{stem}.svg"
            path.write_text(coverage_svg(m))
            written.append(path)

    if isinstance(config_text, str):
        config_text = {"": config_text}
    for preset, text in (config_text or {}).items():
        path = out / (f"config.resolved.{preset}.txt" if preset else "config.resolved.txt")
        path.write_text(text)
        written.append(path)
    return written
