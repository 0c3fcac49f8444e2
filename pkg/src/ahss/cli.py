"""Command-line entry point: ``ahss run | preset | sweep``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from pathlib import Path

import numpy as np

from ahss.lti_core import ConfigurationError, ValidationError
from ahss.runner import (
    CONTROLLERS,
    PRESETS,
    load_config,
    metrics,
    preset,
    run_with_baseline,
    save_config,
    sweep,
    write_outputs,
    write_summary,
    write_sweep,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

log = logging.getLogger("ahss")


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg.seed = args.seed
    if args.duration is not None:
        cfg.timing = dataclasses.replace(cfg.timing, duration=args.duration)
    cfg.validate()
    return cfg


def _execute(cfg, out_dir: Path, args) -> int:
    result, baseline = run_with_baseline(cfg)
    summary = metrics(result, baseline)
    write_outputs(result, out_dir)
    save_config(cfg, out_dir / "config.yaml")
    write_summary(summary, result, out_dir / "summary.txt")
    if not args.quiet:
        for line in summary.lines():
            print(line)
        print(f"outputs={out_dir}")
    if args.strict and result.diverged:
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    out = args.out or cfg.outputs.get("dir") or Path("out") / (cfg.name or Path(args.config).stem)
    return _execute(cfg, Path(out), args)


def cmd_preset(args) -> int:
    cfg = _apply_overrides(preset(args.name, args.controller), args)
    out = args.out or Path("out") / f"{args.name}_{args.controller}"
    return _execute(cfg, Path(out), args)


def cmd_sweep(args) -> int:
    cfg = load_config(args.config) if args.config else preset(args.preset)
    cfg = _apply_overrides(cfg, args)
    if args.random:
        rng = np.random.default_rng(cfg.seed)
        phases = np.sort(rng.uniform(-math.pi, math.pi, args.random))
    else:
        phases = np.linspace(-math.pi, math.pi, args.phases, endpoint=False) + 2 * math.pi / args.phases
    scales = args.scales or [None]
    rows = sweep(cfg, phases, scales, steps=args.steps)
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    write_sweep(rows, path)
    if not args.quiet:
        stable = sum(r["hss_diverged"] == 0 for r in rows)
        conv = sum(r["ahss_converged"] for r in rows)
        print(f"points={len(rows)}")
        print(f"hss_not_diverged={stable}")
        print(f"ahss_converged={conv}")
        print(f"outputs={path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--duration", type=float, default=None, help="override the run duration (s)")
    common.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")
    common.add_argument("--strict", action="store_true", help="exit with status 3 if the run diverges")
    common.add_argument("--out", default=None, help="output directory")

    parser = argparse.ArgumentParser(prog="ahss", description="Harmonic steady-state disturbance rejection experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run an experiment from a YAML config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preset", parents=[common], help="run one of the built-in duct examples")
    p.add_argument("name", choices=PRESETS)
    p.add_argument("--controller", choices=CONTROLLERS, default="ahss")
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("sweep", parents=[common], help="map HSS/AHSS outcomes over the initial-estimate phase")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", default=None)
    src.add_argument("--preset", choices=PRESETS, default="ex1a")
    p.add_argument("--phases", type=int, default=72, help="grid size over (-pi, pi]")
    p.add_argument("--random", type=int, default=0, help="sample this many phases with the seed instead of a grid")
    p.add_argument("--scales", type=float, nargs="*", default=None)
    p.add_argument("--steps", type=int, default=500)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
