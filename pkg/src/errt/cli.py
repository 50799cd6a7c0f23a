"""``errt`` command line.

    errt run --config run.txt --seeds 1..10 --preset greedy --out results/
    errt gen-world --seed 3 --out world.txt
    errt plan-once --world known.txt --state 1.5 1.5 1.5 --seed 0 --out plan.json

Any configuration key can also be given as ``--<key> <value>``, for example
``--cost.preset conservative`` or ``--planner.iterations 3000``.

Exit codes: 0 success, 2 configuration error, 3 mission stalled or planning
failed, 4 input/output error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import KEYS, load_config
from .errors import (ConfigError, ExplorationExhausted, MissionStalled, NoCandidates,
                     ParseError, StartBlocked)
from .pipeline import plan_with_retry
from .results import write_results
from .sim import run_mission
from .voxel_world import load_world, save_world

EXIT_OK, EXIT_CONFIG, EXIT_STALLED, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("errt")


def parse_seeds(text: str) -> list[int]:
    """``"1..10"``, ``"1,4,9"``, ``"7"`` or mixtures like ``"1..3,8"``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = (int(v) for v in part.split("..", 1))
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("no seeds given")
    return seeds


def _split_overrides(extra: list[str]) -> dict[str, str]:
    """Turn leftover ``--key value`` / ``--key=value`` pairs into overrides."""
    out: dict[str, str] = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        name = tok[2:]
        if "=" in name:
            name, value = name.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"missing value for {tok}")
            value = extra[i + 1]
            i += 2
        if name not in KEYS:
            raise ConfigError(f"unknown option --{name}")
        out[name] = value
    return out


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="errt", description="Exploration-RRT planner and simulator.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run seeded exploration missions and write metrics")
    r.add_argument("--config", type=Path)
    r.add_argument("--seeds", default="1..10")
    r.add_argument("--preset", help="cost preset, or several separated by commas")
    r.add_argument("--out", type=Path, required=True)
    r.add_argument("--force", action="store_true", help="overwrite an existing output directory")

    g = sub.add_parser("gen-world", help="write a generated ground-truth world")
    g.add_argument("--config", type=Path)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--force", action="store_true")

    o = sub.add_parser("plan-once", help="plan one trajectory on a known map")
    o.add_argument("--config", type=Path)
    o.add_argument("--world", type=Path, required=True)
    o.add_argument("--state", type=float, nargs="+", required=True,
                   help="position x y z, or the full 8-state")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out", type=Path, required=True)
    o.add_argument("--force", action="store_true")
    return p


def _check_target(path: Path, force: bool) -> None:
    if path.exists() and not force:
        raise FileExistsError(f"{path} exists; pass --force to overwrite")


def _run(args, overrides) -> int:
    presets = [p.strip() for p in args.preset.split(",")] if args.preset else [None]
    seeds = parse_seeds(args.seeds)
    configs = []
    for preset in presets:
        ov = dict(overrides)
        if preset is not None:
            ov["cost.preset"] = preset
        configs.append(load_config(args.config, ov))
    # fail before doing any work if the output directory is taken
    if args.out.exists() and any(args.out.iterdir()) and not args.force:
        raise FileExistsError(f"{args.out} already contains files; pass --force to overwrite")
    metrics, stalled = [], False
    for cfg in configs:
        for seed in seeds:
            try:
                m = run_mission(cfg.mission(seed))
            except MissionStalled as exc:
                log.warning("%s", exc)
                m, stalled = exc.metrics, True
            log.info("seed %d %s: %s, t_90=%s t_100=%s", seed, cfg["cost.preset"], m.status,
                     m.t_90, m.t_100)
            metrics.append(m)
    texts = {cfg["cost.preset"]: cfg.to_text() for cfg in configs}
    write_results(metrics, args.out, texts if len(texts) > 1 else configs[0].to_text(),
                  force=args.force, svg=configs[0]["output.svg"],
                  wall_clock=configs[0]["output.wall_clock_in_metrics"])
    return EXIT_STALLED if stalled else EXIT_OK


def _gen_world(args, overrides) -> int:
    from .sim import generate_world
    cfg = load_config(args.config, overrides)
    _check_target(args.out, args.force)
    save_world(generate_world(cfg.world_spec(), args.seed), args.out)
    return EXIT_OK


def _plan_once(args, overrides) -> int:
    cfg = load_config(args.config, overrides)
    _check_target(args.out, args.force)
    world = load_world(args.world)
    inputs = cfg.planner().inputs(world, args.state, args.seed)
    try:
        result = plan_with_retry(inputs)
    except ExplorationExhausted as exc:
        args.out.write_text(json.dumps({"status": "exhausted", "message": str(exc)}) + "\n")
        return EXIT_OK
    except (NoCandidates, StartBlocked) as exc:
        args.out.write_text(json.dumps({"status": "failed", "message": str(exc)}) + "\n")
        log.error("%s", exc)
        return EXIT_STALLED
    payload = {"status": "ok", **result.to_dict()}
    args.out.write_text(json.dumps(payload, indent=1) + "\n")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        overrides = _split_overrides(extra)
        handler = {"run": _run, "gen-world": _gen_world, "plan-once": _plan_once}[args.command]
        return handler(args, overrides)
    except (ConfigError, ParseError, ValueError) as exc:
        print(f"errt: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"errt: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
