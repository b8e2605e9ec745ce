"""Command line front end.

    smadp run CONFIG|PRESET [--runs N] [--seed S] [--out DIR] [--svg]
    smadp presets
    smadp describe PRESET

Exit codes: 0 success, 1 configuration error, 2 runtime error (including
an algorithm with no successful trial).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .config import PRESETS, describe_preset, load_config, preset
from .exceptions import ConfigError, SmadpError
from .experiment import run_monte_carlo
from .report import emit_csv, emit_svg

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

logger = logging.getLogger("smadp")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smadp", description="Sparsity-aware set-membership adaptive filter benchmarks")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file or preset name")
    run.add_argument("config", help="YAML config file, or the name of a built-in preset")
    run.add_argument("--runs", type=int, help="number of Monte-Carlo trials")
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument("--out", type=Path, help="output directory")
    run.add_argument("--svg", action=argparse.BooleanOptionalAction, default=None, help="write SVG learning curves")

    sub.add_parser("presets", help="list the built-in presets")
    desc = sub.add_parser("describe", help="print a preset as a fully resolved config file")
    desc.add_argument("preset")
    return p


def _run(args) -> int:
    src = Path(args.config)
    if not src.exists() and args.config in PRESETS:
        cfg = preset(args.config)
    else:
        cfg = load_config(src)
    cfg = cfg.with_overrides(runs=args.runs, seed=args.seed, out=args.out, svg=args.svg)
    exp = cfg.experiment

    t0 = time.perf_counter()
    logger.info("running %d trials x %d iterations, digest %s", exp.runs, exp.schedule.total, exp.digest())
    curves = run_monte_carlo(exp)
    logger.info("simulation finished in %.1f s", time.perf_counter() - t0)

    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    csv_path, summary = emit_csv(curves, out / "curves.csv", db=cfg.db)
    written = [csv_path, summary]
    if cfg.emit_svg:
        title = f"{cfg.preset}, {exp.runs} runs"
        written.append(emit_svg(curves, out / "mse.svg", "mse", db=cfg.db, title=title))
        written.append(emit_svg(curves, out / "msd.svg", "msd", db=cfg.db, title=title))

    unit = "dB" if cfg.db else ""
    print(f"{'algorithm':28s} {'phase':>5s} {'system':>12s} {'MSE ' + unit:>10s} {'MSD ' + unit:>10s} {'updates':>8s}")
    for c in curves:
        for k, kind in enumerate(c.phase_kinds):
            mse, msd = (c.steady_state_db if cfg.db else c.steady_state)("mse", k), (
                c.steady_state_db if cfg.db else c.steady_state
            )("msd", k)
            print(f"{c.label:28s} {k:5d} {kind:>12s} {mse:10.3f} {msd:10.3f} {c.update_rate(k, True):8.3f}")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "presets":
            for name, spec in PRESETS.items():
                print(f"{name:10s} {spec['description']}")
            return EXIT_OK
        if args.command == "describe":
            print(describe_preset(args.preset), end="")
            return EXIT_OK
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SmadpError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
