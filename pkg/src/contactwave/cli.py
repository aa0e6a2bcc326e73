"""Run contact-wave stability scenarios from the command line.

    contactwave run   --config cfg.yaml [--out DIR] [--seed N] [--grid-refine K]
    contactwave run   --scenario perturbed_wave
    contactwave suite [--out DIR] [--seed N] [--grid-refine K] [--workers W]
    contactwave sweep {delta0,amplitude} [--config cfg.yaml] ...

Exit status is 0 only when every asserted flag passes; otherwise one line
per failing flag is printed to stderr.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import RunConfig, load_config
from .errors import ConfigError
from .experiments import SCENARIO_NAMES, SUITE, RunRecord, default_scenario, run_scenario
from .output import default_output_root, dump_json, emit_series, summary_dict

SWEEPS = {"delta0": "delta0_sweep", "amplitude": "amplitude_sweep"}


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="YAML run configuration")
    p.add_argument("--out", type=Path, help="output directory (default: $CONTACTWAVE_OUT or ./contactwave_out)")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--grid-refine", type=int, default=None, metavar="K", help="halve dx K times")
    p.add_argument("--workers", type=int, default=None, help="worker processes for sweeps and the suite")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contactwave", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a single scenario")
    _common(run)
    run.add_argument("--scenario", choices=SCENARIO_NAMES, help="run a built-in scenario instead of a config")
    suite = sub.add_parser("suite", help="run the acceptance scenarios")
    _common(suite)
    sweep = sub.add_parser("sweep", help="delta0 or amplitude sweep")
    sweep.add_argument("kind", choices=sorted(SWEEPS))
    _common(sweep)
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    s = cfg.scenario
    if args.seed is not None:
        s = s.with_seed(args.seed)
    if args.grid_refine is not None:
        if args.grid_refine < 0:
            raise ConfigError("--grid-refine must be >= 0")
        s = replace(s, grid=replace(s.grid, refine=args.grid_refine))
    if args.workers is not None:
        s = replace(s, workers=max(1, args.workers))
    return replace(cfg, scenario=s)


def _out_dir(args, cfg: RunConfig | None) -> Path:
    if args.out is not None:
        return args.out
    if cfg is not None and cfg.output_dir:
        return Path(cfg.output_dir)
    return default_output_root()


def _report(records: list[RunRecord]) -> int:
    failures = []
    for rec in records:
        status = "ok" if rec.ok else f"FAILED RUN ({rec.error})"
        print(f"== {rec.scenario.name}: {status}")
        for flag in rec.flags:
            print("  " + flag.line())
        failures += [f"{rec.scenario.name}: {f.key}: measured={f.measured!r} required {f.threshold}"
                     for f in rec.failed_flags()]
        if not rec.ok and not rec.failed_flags():
            failures.append(f"{rec.scenario.name}: run failed: {rec.error}")
    for line in failures:
        print("FAIL " + line, file=sys.stderr)
    return 0 if not failures else 1


def _run_one(cfg: RunConfig, out: Path) -> RunRecord:
    rec = run_scenario(cfg.scenario)
    emit_series(rec, out, cfg.compress_snapshots)
    return rec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            if args.config is None and args.scenario is None:
                raise ConfigError("run needs --config or --scenario")
            cfg = load_config(args.config) if args.config else RunConfig(default_scenario(args.scenario))
            cfg = _apply_overrides(cfg, args)
            rec = _run_one(cfg, _out_dir(args, cfg))
            return _report([rec])

        if args.command == "sweep":
            name = SWEEPS[args.kind]
            cfg = load_config(args.config) if args.config else RunConfig(default_scenario(name))
            if cfg.scenario.name != name:
                cfg = replace(cfg, scenario=replace(cfg.scenario, name=name))
            cfg = _apply_overrides(cfg, args)
            rec = _run_one(cfg, _out_dir(args, cfg))
            return _report([rec])

        # suite
        base_cfg = load_config(args.config) if args.config else None
        root = _out_dir(args, base_cfg)
        records = []
        for name in SUITE:
            cfg = _apply_overrides(RunConfig(default_scenario(name)), args)
            if base_cfg is not None and base_cfg.scenario.name == name:
                cfg = _apply_overrides(base_cfg, args)
            records.append(_run_one(cfg, root / name))
        root.mkdir(parents=True, exist_ok=True)
        summary = {rec.scenario.name: summary_dict(rec) for rec in records}
        (root / "summary.json").write_text(dump_json(summary), encoding="utf-8")
        return _report(records)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
