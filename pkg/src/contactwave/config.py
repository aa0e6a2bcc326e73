"""YAML run configuration: strict parsing with line numbers, and a canonical dump.

Grammar (every section and key optional except ``scenario``)::

    scenario: perturbed_wave        # one of the scenario names
    seed: 0
    physics:   {R, gamma, mu, kappa, theta_minus, theta_plus, v_plus, delta0}
    grid:      {half_width: <float> | auto, dx, refine}
    run:       {t_final, extend_factor, output_t0, output_ratio, sample_every,
                snapshot_times: [..], stationary_steps, max_steps, workers}
    initial:   {shape, amp_phi, amp_psi, amp_zeta, center, width}
    sweep:     {amplitudes: [..], delta0_list: [1/9, ..]}
    output:    {dir: <path> | null, compress_snapshots: <bool>}

``delta0`` values are written as ``1/9``-style rationals. Unknown keys are
errors. :func:`dump_config` emits every key in the order above, so a
dumped file parses back to the same configuration and re-dumps identically.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from fractions import Fraction

import yaml

from .errors import ConfigError, ContactWaveError
from .experiments import SCENARIO_NAMES, GridSpec, Scenario, default_scenario
from .flow import InitialData
from .params import PhysParams, parse_delta0

PHYSICS_KEYS = ("R", "gamma", "mu", "kappa", "theta_minus", "theta_plus", "v_plus", "delta0")
GRID_KEYS = ("half_width", "dx", "refine")
RUN_KEYS = (
    "t_final",
    "extend_factor",
    "output_t0",
    "output_ratio",
    "sample_every",
    "snapshot_times",
    "stationary_steps",
    "max_steps",
    "workers",
)
INITIAL_KEYS = ("shape", "amp_phi", "amp_psi", "amp_zeta", "center", "width")
SWEEP_KEYS = ("amplitudes", "delta0_list")
OUTPUT_KEYS = ("dir", "compress_snapshots")
SECTIONS = {
    "physics": PHYSICS_KEYS,
    "grid": GRID_KEYS,
    "run": RUN_KEYS,
    "initial": INITIAL_KEYS,
    "sweep": SWEEP_KEYS,
    "output": OUTPUT_KEYS,
}
INT_KEYS = {"refine", "sample_every", "stationary_steps", "max_steps", "workers"}


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    output_dir: str | None = None
    compress_snapshots: bool = False


# --------------------------------------------------------------------------
# Node walking


def _line(node) -> int:
    return node.start_mark.line + 1


def _scalar(node, path: str):
    if not isinstance(node, yaml.ScalarNode):
        raise ConfigError("expected a single value", _line(node), path)
    tag, text = node.tag, node.value
    if tag.endswith(":null"):
        return None
    if tag.endswith(":bool"):
        return text.lower() in ("true", "yes", "on")
    if tag.endswith(":int"):
        return int(text.replace("_", ""), 0)
    if tag.endswith(":float"):
        return float(text.replace("_", ""))
    return text


def _to_float(node, path: str) -> float:
    value = _scalar(node, path)
    if isinstance(value, bool) or value is None:
        raise ConfigError("expected a number", _line(node), path)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {value!r}", _line(node), path) from None


def _to_int(node, path: str) -> int:
    value = _scalar(node, path)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", _line(node), path)
    return value


def _to_list(node, path: str, item):
    if not isinstance(node, yaml.SequenceNode):
        raise ConfigError("expected a list", _line(node), path)
    return tuple(item(n, f"{path}[{i}]") for i, n in enumerate(node.value))


def _to_delta0(node, path: str) -> float:
    value = _scalar(node, path)
    try:
        return parse_delta0(value if isinstance(value, str) else float(value))
    except (ContactWaveError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), _line(node), path) from None


def _mapping(node, path: str, allowed) -> dict:
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError("expected a mapping of keys to values", _line(node), path or None)
    out = {}
    for key_node, value_node in node.value:
        key = _scalar(key_node, path)
        full = f"{path}.{key}" if path else str(key)
        if key not in allowed:
            raise ConfigError(f"unknown key (allowed: {', '.join(allowed)})", _line(key_node), full)
        if key in out:
            raise ConfigError("duplicate key", _line(key_node), full)
        out[key] = value_node
    return out


# --------------------------------------------------------------------------
# Parsing


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text.

    Syntax errors and validation errors both raise ConfigError carrying
    the 1-based line and the dotted field path when known.
    """
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"syntax error: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None) from None
    if root is None:
        raise ConfigError("empty configuration")
    top = _mapping(root, "", ("scenario", "seed", *SECTIONS))
    if "scenario" not in top:
        raise ConfigError("missing required key", _line(root), "scenario")
    name = _scalar(top["scenario"], "scenario")
    if name not in SCENARIO_NAMES:
        raise ConfigError(f"must be one of {', '.join(SCENARIO_NAMES)}", _line(top["scenario"]), "scenario")
    base = default_scenario(name)
    sec = {k: _mapping(top[k], k, SECTIONS[k]) if k in top else {} for k in SECTIONS}

    def check(path, node, fn):
        try:
            return fn()
        except ConfigError:
            raise
        except (ContactWaveError, ValueError, TypeError) as exc:
            raise ConfigError(str(exc), _line(node), path) from None

    phys = base.params.as_dict()
    for key, node in sec["physics"].items():
        phys[key] = _to_delta0(node, f"physics.{key}") if key == "delta0" else _to_float(node, f"physics.{key}")
    for key, node in sec["physics"].items():
        # validate field by field first so the error points at the offending line
        check(f"physics.{key}", node, lambda k=key: PhysParams(**{**base.params.as_dict(), k: phys[k]}))
    first = next(iter(sec["physics"].values()), top["scenario"])
    params = check("physics", first, lambda: PhysParams(**phys))

    grid_kw = {"half_width": base.grid.half_width, "dx": base.grid.dx, "refine": base.grid.refine}
    for key, node in sec["grid"].items():
        path = f"grid.{key}"
        if key == "half_width":
            value = _scalar(node, path)
            if value == "auto" or value is None:
                grid_kw[key] = None
                continue
            grid_kw[key] = _to_float(node, path)
            if not grid_kw[key] > 0.0:
                raise ConfigError("must be positive or 'auto'", _line(node), path)
        elif key == "refine":
            grid_kw[key] = _to_int(node, path)
            if grid_kw[key] < 0:
                raise ConfigError("must be >= 0", _line(node), path)
        else:
            grid_kw[key] = _to_float(node, path)
            if not grid_kw[key] > 0.0:
                raise ConfigError("must be positive", _line(node), path)
    grid = GridSpec(**grid_kw)

    run_kw = {}
    for key, node in sec["run"].items():
        path = f"run.{key}"
        if key == "snapshot_times":
            run_kw[key] = _to_list(node, path, _to_float)
        elif key in INT_KEYS:
            run_kw[key] = _to_int(node, path)
            if run_kw[key] < 1:
                raise ConfigError("must be >= 1", _line(node), path)
        else:
            run_kw[key] = _to_float(node, path)

    init_kw = {f.name: getattr(base.initial, f.name) for f in fields(InitialData)}
    for key, node in sec["initial"].items():
        path = f"initial.{key}"
        init_kw[key] = _scalar(node, path) if key == "shape" else _to_float(node, path)
    seed = _to_int(top["seed"], "seed") if "seed" in top else base.seed
    init_kw["seed"] = seed
    initial = check("initial", next(iter(sec["initial"].values()), top["scenario"]), lambda: InitialData(**init_kw))

    sweep_kw = {}
    for key, node in sec["sweep"].items():
        path = f"sweep.{key}"
        sweep_kw[key] = _to_list(node, path, _to_delta0 if key == "delta0_list" else _to_float)

    out_dir, compress = None, False
    for key, node in sec["output"].items():
        path = f"output.{key}"
        value = _scalar(node, path)
        if key == "dir":
            if value is not None and not isinstance(value, str):
                raise ConfigError("expected a path or null", _line(node), path)
            out_dir = value
        else:
            if not isinstance(value, bool):
                raise ConfigError("expected true or false", _line(node), path)
            compress = value

    anchor = next(iter(sec["run"].values()), top["scenario"])
    scenario = check(
        "run",
        anchor,
        lambda: replace(base, name=name, params=params, grid=grid, initial=initial, seed=seed, **run_kw, **sweep_kw),
    )
    return RunConfig(scenario, out_dir, compress)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# --------------------------------------------------------------------------
# Canonical dump


def _fmt(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        text = repr(value)
        return text if ("." in text or "e" in text or "n" in text) else text + ".0"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return str(value)


def _fmt_delta0(d: float) -> str:
    n = round(1.0 / d)
    return f"1/{n}" if abs(1.0 / n - d) <= 1e-15 else repr(Fraction(d).limit_denominator(10**6))


def dump_config(cfg: RunConfig) -> str:
    s = cfg.scenario
    p = s.params
    lines = [f"scenario: {s.name}", f"seed: {s.seed}", "physics:"]
    for key in PHYSICS_KEYS:
        val = getattr(p, key)
        lines.append(f"  {key}: {_fmt_delta0(val) if key == 'delta0' else _fmt(float(val))}")
    lines.append("grid:")
    lines.append(f"  half_width: {'auto' if s.grid.half_width is None else _fmt(float(s.grid.half_width))}")
    lines.append(f"  dx: {_fmt(float(s.grid.dx))}")
    lines.append(f"  refine: {s.grid.refine}")
    lines.append("run:")
    for key in RUN_KEYS:
        val = getattr(s, key)
        if key == "snapshot_times":
            val = [float(v) for v in val]
        elif key not in INT_KEYS:
            val = float(val)
        lines.append(f"  {key}: {_fmt(val)}")
    lines.append("initial:")
    for key in INITIAL_KEYS:
        val = getattr(s.initial, key)
        lines.append(f"  {key}: {val if key == 'shape' else _fmt(float(val))}")
    lines.append("sweep:")
    lines.append(f"  amplitudes: {_fmt([float(a) for a in s.amplitudes])}")
    lines.append(f"  delta0_list: [{', '.join(_fmt_delta0(d) for d in s.delta0_list)}]")
    lines.append("output:")
    lines.append(f"  dir: {_fmt(cfg.output_dir)}")
    lines.append(f"  compress_snapshots: {_fmt(cfg.compress_snapshots)}")
    return "\n".join(lines) + "\n"
