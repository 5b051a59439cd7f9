"""Command line entry point: scenclust {explore,grid,analyze,reduce,plot,report}."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .config import ConfigError, Mode, RunConfig
from .run import PipelineError, RunManifest, report, run

# flags for analysis-only fields (shared by every subcommand that runs stages)
ANALYSIS_FIELDS = ("stride", "band", "gamma", "target_median", "k", "cluster_space",
                   "eps_behavior", "eps_criticality", "min_pts", "archetypes", "prototypes",
                   "nonconvex_threshold", "reduce_branch", "metric", "pair")
EXPLORE_FIELDS = ("template", "profile", "parameters", "direction", "budget", "n_init",
                  "grid_steps", "seed", "target", "pool_size", "n_features")
OPTIONAL_FLOATS = {"target", "nonconvex_threshold"}
OPTIONAL_INTS = {"band"}


def _field_types():
    defaults = RunConfig.__dataclass_fields__
    out = {}
    for f in fields(RunConfig):
        if f.name in OPTIONAL_FLOATS:
            out[f.name] = float
        elif f.name in OPTIONAL_INTS:
            out[f.name] = int
        elif f.name in ("parameters", "pair"):
            out[f.name] = None
        elif defaults[f.name].default is None:
            out[f.name] = str
        else:
            out[f.name] = type(defaults[f.name].default)
    return out


def _add_fields(parser, names):
    types = _field_types()
    for name in names:
        flag = "--" + name.replace("_", "-")
        if name == "pair":
            parser.add_argument(flag, nargs=2, metavar="ACTOR", default=None,
                                help="actor pair for the metric, e.g. Ego Pedestrian")
        elif name == "parameters":
            parser.add_argument(flag, type=json.loads, default=None, metavar="JSON",
                                help='range overrides, e.g. \'[{"name": "ego_start_s", "lower": 0, "upper": 20}, ...]\'')
        else:
            parser.add_argument(flag, type=types[name], default=None, dest=name)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scenclust",
                                     description="Explore, cluster and reduce driving scenarios.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (("explore", "Bayesian-optimization exploration, then analysis"),
                           ("grid", "full-grid exploration, then analysis")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--out", type=str, help="run directory (overrides out_dir)")
        _add_fields(p, EXPLORE_FIELDS + ANALYSIS_FIELDS)

    for name, helptext in (("analyze", "re-run analysis on persisted traces"),
                           ("reduce", "re-run analysis up to the reduced set")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--out", type=str, required=True, help="existing run directory")
        _add_fields(p, ANALYSIS_FIELDS)

    for name, helptext in (("plot", "emit SVG plots of a completed run"),
                           ("report", "print a summary of a run")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--out", type=str, required=True, help="existing run directory")
    return parser


def _overrides(args, names) -> dict:
    out = {}
    for name in names:
        value = getattr(args, name, None)
        if value is not None:
            out[name] = list(value) if name == "pair" else value
    return out


def config_from_args(args) -> RunConfig:
    if args.command in ("explore", "grid"):
        data = json.loads(args.config.read_text()) if args.config else {}
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        data.update(_overrides(args, EXPLORE_FIELDS + ANALYSIS_FIELDS))
        data["mode"] = Mode.EXPLORE.value if args.command == "explore" else Mode.GRID.value
        if args.out:
            data["out_dir"] = args.out
        return RunConfig.from_dict(data)
    manifest = RunManifest.load(args.out)
    data = dict(manifest.config)
    data.update(_overrides(args, ANALYSIS_FIELDS))
    data["mode"] = Mode.ANALYZE_ONLY.value
    data["out_dir"] = args.out
    return RunConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            sys.stdout.write(report(RunManifest.load(args.out)))
            return 0
        if args.command == "plot":
            from .plots import emit_plots
            for path in emit_plots(RunManifest.load(args.out), args.out):
                print(path)
            return 0
        config = config_from_args(args)
        manifest = run(config, stop_after="reduce" if args.command == "reduce" else None)
        sys.stdout.write(report(manifest))
        return 0
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
