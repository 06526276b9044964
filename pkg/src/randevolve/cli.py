"""Command-line scenario runner.

Configuration files are INI text with these sections::

    [scenario]
    name = jcm-damped          # required, see `randevolve list`

    [params]                   # scenario-specific keys, all optional
    gamma = 0.05

    [grid]                     # scenarios on a time grid
    t_end = 12
    n_steps = 500
    save_every = 1             # ensemble sampling stride, must divide n_steps

    [ensemble]                 # scenarios with Monte Carlo
    n_traj = 400
    master_seed = 1
    workers = 1

Unknown sections or keys are rejected. Lists are comma separated and
matrices use ``;`` between rows. Each run writes ``<stem>.csv`` and then
``<stem>.manifest.json`` to the output directory, ``<stem>`` being the
config file name without extension.

Exit status: 0 success, 1 an invariant check failed (outputs written),
2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .core import ConvergenceError, InvariantError
from .scenarios import SCENARIOS, RunSpec, ScenarioOutput
from .stochastic import TimeGrid

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    name: str
    stem: str
    params: dict
    grid: dict
    ensemble: dict
    raw: dict


def shipped_configs() -> dict:
    """Stem -> path of every config bundled with the package."""
    root = resources.files("randevolve") / "configs"
    return {Path(p.name).stem: Path(str(p)) for p in sorted(root.iterdir(), key=lambda q: q.name)
            if p.name.endswith(".ini")}


def _resolve(path_or_name: str) -> Path:
    p = Path(path_or_name)
    if p.exists():
        return p
    shipped = shipped_configs()
    if path_or_name in shipped:
        return shipped[path_or_name]
    raise ConfigError(f"no config file or shipped config named {path_or_name!r}")


def parse_config(text: str, stem: str, overrides: dict | None = None) -> ScenarioConfig:
    """Validate config text against the scenario schema."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from None
    if not cp.has_option("scenario", "name"):
        raise ConfigError("missing [scenario] name")
    name = cp.get("scenario", "name")
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}")
    sc = SCENARIOS[name]
    allowed = {"scenario": {"name"}, "params": set(sc.params)}
    if sc.grid:
        allowed["grid"] = {"t_end", "n_steps", "save_every"}
    if sc.ensemble:
        allowed["ensemble"] = {"n_traj", "master_seed", "workers"}
    for section in cp.sections():
        if section not in allowed:
            raise ConfigError(f"section [{section}] not allowed for {name}")
        extra = set(cp.options(section)) - allowed[section]
        if extra:
            raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(extra))}")

    def typed(section, key, parser, default):
        if not cp.has_option(section, key):
            return default
        try:
            return parser(cp.get(section, key))
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from None

    params = {k: typed("params", k, parser, default) for k, (parser, default) in sc.params.items()}
    grid, ens = {}, {}
    if sc.grid:
        grid = {"t_end": typed("grid", "t_end", float, sc.grid[0]),
                "n_steps": typed("grid", "n_steps", int, sc.grid[1]),
                "save_every": typed("grid", "save_every", int, 1)}
    if sc.ensemble:
        ens = {"n_traj": typed("ensemble", "n_traj", int, sc.ensemble["n_traj"]),
               "master_seed": typed("ensemble", "master_seed", int, sc.ensemble["master_seed"]),
               "workers": typed("ensemble", "workers", int, 1)}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "n_steps" and grid:
            grid["n_steps"] = value
        elif key in ("n_traj", "master_seed", "workers") and ens:
            ens[key] = value
    if grid:
        if grid["n_steps"] < 1 or not grid["t_end"] > 0:
            raise ConfigError("grid needs t_end > 0 and n_steps >= 1")
        if grid["save_every"] < 1 or grid["n_steps"] % grid["save_every"]:
            raise ConfigError("save_every must be a positive divisor of n_steps")
    if ens:
        if ens["n_traj"] < 2 or ens["master_seed"] < 0 or ens["workers"] < 1:
            raise ConfigError("ensemble needs n_traj >= 2, master_seed >= 0, workers >= 1")
    raw = {s: dict(cp.items(s)) for s in cp.sections()}
    return ScenarioConfig(name, stem, params, grid, ens, raw)


def load_config(path_or_name: str, overrides: dict | None = None) -> ScenarioConfig:
    path = _resolve(path_or_name)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, path.stem, overrides)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def execute(cfg: ScenarioConfig) -> ScenarioOutput:
    sc = SCENARIOS[cfg.name]
    grid = TimeGrid(cfg.grid["t_end"], cfg.grid["n_steps"]) if cfg.grid else None
    spec = RunSpec(cfg.params, grid, cfg.grid.get("save_every", 1),
                   cfg.ensemble.get("n_traj"), cfg.ensemble.get("master_seed"),
                   cfg.ensemble.get("workers", 1))
    try:
        return sc.runner(spec)
    except (InvariantError, ConvergenceError):
        raise
    except ValueError as exc:
        # parameter rejected by a model constructor
        raise ConfigError(str(exc)) from None


def format_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in np.atleast_2d(rows):
        w.writerow(["%.17g" % x for x in row])
    return buf.getvalue()


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_outputs(cfg: ScenarioConfig, out: ScenarioOutput, out_dir: Path, duration: float) -> dict:
    csv_path = out_dir / f"{cfg.stem}.csv"
    atomic_write(csv_path, format_csv(out.columns, out.rows))
    manifest = {
        "scenario": cfg.name,
        "version": __version__,
        "config": cfg.raw,
        "resolved": {"params": {k: _jsonable(v) for k, v in cfg.params.items()},
                     "grid": cfg.grid, "ensemble": cfg.ensemble},
        "outputs": [csv_path.name],
        "duration_s": duration,
        "checks": [c.as_dict() for c in out.checks],
        "failures": sum(not c.passed for c in out.checks),
        **{k: _jsonable(v) for k, v in out.extras.items()},
    }
    atomic_write(out_dir / f"{cfg.stem}.manifest.json", json.dumps(manifest, indent=2) + "\n")
    return manifest


def run_one(path_or_name: str, out_dir: Path, overrides: dict, stream=None):
    stream = stream or sys.stdout
    cfg = load_config(path_or_name, overrides)
    t0 = time.perf_counter()
    out = execute(cfg)
    manifest = write_outputs(cfg, out, out_dir, time.perf_counter() - t0)
    for c in out.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {cfg.stem}:{c.name} value={c.value:.3g} limit={c.limit:.3g}",
              file=stream)
    return cfg, out, manifest


def list_scenarios() -> str:
    width = max(len(n) for n in SCENARIOS)
    lines = [f"{'scenario'.ljust(width)}  description  [reproduces]"]
    for name, sc in SCENARIOS.items():
        lines.append(f"{name.ljust(width)}  {sc.description}  [{sc.anchor}]")
    return "\n".join(lines)


def selftest(out_dir: Path, overrides: dict, stream=None) -> int:
    """Run every shipped config, then write ``selftest.csv`` with all checks."""
    stream = stream or sys.stdout
    rows = []
    for stem in shipped_configs():
        cfg, out, _ = run_one(stem, out_dir, overrides, stream)
        rows += [(stem, c.name, c.value, c.limit, int(c.passed)) for c in out.checks]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["config", "check", "value", "limit", "passed"])
    for stem, name, value, limit, ok in rows:
        w.writerow([stem, name, "%.17g" % value, "%.17g" % limit, ok])
    atomic_write(out_dir / "selftest.csv", buf.getvalue())
    failures = sum(1 - r[4] for r in rows)
    print(f"{len(rows)} checks, {failures} failures", file=stream)
    return EXIT_OK if failures == 0 else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="randevolve", description="Random unitary evolution scenarios")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--traj", type=int, help="override the trajectory count")
        p.add_argument("--steps", type=int, help="override the number of grid steps")
        p.add_argument("--workers", type=int, help="worker threads for ensembles")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")

    r = sub.add_parser("run", help="run a scenario config (file path or shipped name)")
    r.add_argument("config")
    common(r)
    sub.add_parser("list", help="list registered scenarios")
    s = sub.add_parser("selftest", help="run all shipped configs and their invariant checks")
    common(s)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        print(list_scenarios())
        return EXIT_OK
    overrides = {"master_seed": args.seed, "n_traj": args.traj, "n_steps": args.steps,
                 "workers": args.workers}
    try:
        if args.command == "selftest":
            return selftest(args.out, overrides)
        _, out, _ = run_one(args.config, args.out, overrides)
        return EXIT_OK if all(c.passed for c in out.checks) else EXIT_CHECK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantError, ConvergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
