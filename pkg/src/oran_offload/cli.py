"""Command line: ``run``, ``scenario`` and ``topology`` subcommands.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import yaml

from .errors import BadScenario, ConfigError, OffloadError, UnknownExperiment
from .experiments import EXPERIMENTS, run_experiment, summarize
from .output import emit_outputs
from .scenario import Scenario, default_scenario, dump_scenario, seed_stream
from .topology import cube_spec

log = logging.getLogger("oran_offload")

RUN_KEYS = ("seeds", "experiment", "workers")


def parse_seeds(text) -> list[int]:
    """'0,1,2' or '0-2' (inclusive range) or a mix of both."""
    seeds = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = part.split("-", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError as exc:
            raise ConfigError(f"bad seed list {text!r}") from exc
    if not seeds or min(seeds) < 0:
        raise ConfigError(f"seed list {text!r} is empty or negative")
    return seeds


def load_config(path) -> tuple[Scenario, dict]:
    """Scenario plus run-level keys from a YAML (or JSON manifest) file."""
    try:
        with open(path) as fh:
            raw = (json.load(fh) if str(path).endswith(".json") else yaml.safe_load(fh)) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config {path} is not valid YAML or JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    run = {k: raw.pop(k) for k in RUN_KEYS if k in raw}
    if "scenario" in raw:
        extra = set(raw) - {"scenario"} - {"version", "episodes_per_run", "seconds_per_run", "files"}
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        raw = raw["scenario"] or {}
    try:
        return Scenario.from_dict(raw), run
    except (TypeError, BadScenario) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_run(args) -> int:
    if args.config:
        sc, run = load_config(args.config)
    else:
        sc, run = default_scenario(), {}
    if args.episodes is not None:
        try:
            sc = sc.replace(rl={"episodes": args.episodes})
        except BadScenario as exc:
            raise ConfigError(str(exc)) from exc
    name = args.experiment or run.get("experiment") or "all"
    if name != "all" and name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)} or all")
    seeds = parse_seeds(args.seeds) if args.seeds is not None else [int(s) for s in run.get("seeds", [0, 1, 2])]
    workers = args.workers if args.workers is not None else run.get("workers")
    log.info("running %s on seeds %s", name, seeds)
    results = run_experiment(name, sc, seeds, workers=workers)
    files = emit_outputs(results, args.out, sc, seeds, name)
    for (exp, var), stats in summarize(results).items():
        main = stats.get("final_reward") or stats.get("delay") or stats.get("selected") or next(iter(stats.values()))
        log.info("%s/%s: %.6g +- %.3g", exp, var, main[0], main[1])
    print("\n".join(str(f) for f in files))
    return 0


def cmd_scenario(args) -> int:
    if not args.emit_default:
        raise ConfigError("nothing to do; pass --emit-default")
    text = dump_scenario(default_scenario(), args.out)
    if args.out is None:
        sys.stdout.write(text)
    return 0


def cmd_topology(args) -> int:
    if not args.emit_cube:
        raise ConfigError("nothing to do; pass --emit-cube")
    sc = default_scenario()
    # same draw as the scenario's infrastructure, so the emitted file matches the default instance
    spec = cube_spec(sc.fronthaul_capacity, seed_stream(args.instance_seed, "infra"))
    text = yaml.safe_dump(spec, sort_keys=False)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oran-offload", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment and write CSV/SVG outputs")
    r.add_argument("--experiment", help=f"one of {', '.join(EXPERIMENTS)} or all (default all)")
    r.add_argument("--config", help="YAML scenario file or a previous run's manifest.json")
    r.add_argument("--seeds", help="comma list or inclusive range, e.g. 0,1,2 or 0-2 (default 0,1,2)")
    r.add_argument("--out", default="results", help="output directory")
    r.add_argument("--workers", type=int, help="parallel runs (default: CPU count)")
    r.add_argument("--episodes", type=int, help="override the training episode count")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("scenario", help="emit the default scenario as YAML")
    s.add_argument("--emit-default", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_scenario)

    t = sub.add_parser("topology", help="emit the cubical fronthaul topology as YAML")
    t.add_argument("--emit-cube", action="store_true")
    t.add_argument("--instance-seed", type=int, default=0)
    t.add_argument("--out")
    t.set_defaults(func=cmd_topology)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UnknownExperiment) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (OffloadError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
