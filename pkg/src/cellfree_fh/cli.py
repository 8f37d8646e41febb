"""Command-line entry point: ``cellfree-fh run CONFIG [overrides]``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import yaml

from . import ConfigurationError, __version__
from .experiment import ExperimentConfig, run_sweep
from .fronthaul import default_topology, save_topology
from .geometry import NetworkArea, place_rus_grid

log = logging.getLogger("cellfree_fh")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cellfree-fh", description="Cell-free massive MIMO sweeps with fronthaul placement.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a (K, D) sweep and write results.csv + metadata.json")
    run.add_argument("config", nargs="?", help="YAML config file (defaults to the full evaluation setup)")
    run.add_argument("-o", "--out", default="results", help="output directory (default: results)")
    run.add_argument("--seed", type=int)
    run.add_argument("--K", dest="K_list", type=_ints, help="user counts, e.g. '75,100'")
    run.add_argument("--D", dest="D_ratios", type=_floats, help="distortion ratios D/sigma2_min, e.g. '1,5,20'")
    run.add_argument("--realizations", type=int)
    run.add_argument("--drops", type=int)
    run.add_argument("--solver", choices=["builtin", "highs", "external"])
    run.add_argument("--solver-command", help="external solver template with {lp} and {sol}")
    run.add_argument("--time-limit", type=float, help="per-MILP time limit in seconds")
    run.add_argument("--topology", help="fronthaul topology JSON")
    run.add_argument("--link-loads", action="store_true", help="also write link_loads.csv")

    topo = sub.add_parser("topology", help="write the default fronthaul topology as JSON")
    topo.add_argument("out", help="output JSON path")
    topo.add_argument("config", nargs="?")
    return p


def load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise ConfigurationError("config file must hold a mapping")
    return ExperimentConfig.from_dict(data)


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    d = cfg.to_dict()
    for key in ("seed", "K_list", "D_ratios", "realizations", "drops", "topology"):
        val = getattr(args, key)
        if val is not None:
            d[key] = val
    if args.solver:
        d["solver"]["backend"] = args.solver
    if args.solver_command:
        d["solver"]["command"] = args.solver_command
    if args.time_limit is not None:
        d["solver"]["time_limit"] = args.time_limit
    if args.link_loads:
        d["dump_link_loads"] = True
    return ExperimentConfig.from_dict(d)


def _cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    rows = run_sweep(cfg, args.out)
    failed = sum(math.isnan(r["fh_objective"]) for r in rows)
    print(f"wrote {len(rows)} rows to {Path(args.out) / 'results.csv'}")
    if rows and failed == len(rows):
        log.error("every MILP solve failed")
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_topology(args) -> int:
    cfg = load_config(args.config)
    area = NetworkArea(cfg.area_width, cfg.area_height)
    ru = place_rus_grid(cfg.L, cfg.grid_rows, cfg.grid_cols, area)
    save_topology(default_topology(ru, cfg.Q, cfg.N, area), args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_topology(args)
    except (ConfigurationError, FileNotFoundError, yaml.YAMLError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
