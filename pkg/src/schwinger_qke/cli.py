"""Command-line front end: ``schwinger-qke {field,mode,grid,sweep}``.

Configuration is layered: built-in defaults < ``--config`` file <
``--set key=value`` flags. Config files are either a flat JSON object or
flat ``key = value`` text with ``#`` comments. Recognised keys:

physics
    ``model`` (single | bifreq | am), ``E0_over_Ec``, ``omega_over_m``,
    ``sigma``, ``k_E``, ``k_omega``, ``phi``
integrator
    ``rel_tol``, ``abs_tol``, ``max_step``, ``window_halfwidth_factor``,
    ``drift_limit``
grid
    ``grid_npar``, ``grid_nperp``, ``grid_box`` (p_par half-width, m),
    ``grid_pperp_max`` (m)
sweep
    ``sweep_axis`` (k_E | k_omega | omega_over_m), ``sweep_points``
    (comma list) or ``sweep_range`` (``lin:a:b:n`` or ``log:a:b:n``),
    ``sweep_baselines`` (any of ``n1``, ``n2`` comma-joined, or ``none``)

Every CSV gets a header row with units and a sidecar ``<out>.manifest.json``.
Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 partial sweep failure.
"""

from __future__ import annotations

import argparse
import difflib
import json
import math
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import PulseConfig, strong_only, validate, weak_only
from .errors import ConfigError, NumericalError, ParseError, UnknownKey
from .fields import eval_E, eval_eA
from .integrator import DEFAULT_BACKEND, IntegratorSettings, evolve_mode
from .kinetics import MomentumMode
from .observables import (
    DistributionSlice,
    MomentumGrid,
    ScanResult,
    SliceAxis,
    default_grid,
    density_with_diagnostics,
    momentum_slice,
    residual_distribution,
    solve_modes,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_PARTIAL = 3

FLOAT_FMT = "%.15e"

PHYSICS_KEYS = {
    "model": "model",
    "E0_over_Ec": "E0",
    "omega_over_m": "omega",
    "sigma": "sigma",
    "k_E": "kE",
    "k_omega": "kOmega",
    "phi": "phi",
}
INTEGRATOR_KEYS = {
    "rel_tol": float,
    "abs_tol": float,
    "max_step": float,
    "window_halfwidth_factor": float,
    "drift_limit": float,
}
GRID_KEYS = {"grid_npar": int, "grid_nperp": int, "grid_box": float, "grid_pperp_max": float}
SWEEP_KEYS = ("sweep_axis", "sweep_points", "sweep_range", "sweep_baselines")
VALID_KEYS = tuple(PHYSICS_KEYS) + tuple(INTEGRATOR_KEYS) + tuple(GRID_KEYS) + SWEEP_KEYS

SWEEP_AXES = {"k_E": "kE", "k_omega": "kOmega", "omega_over_m": "omega"}


# -- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class GridOverrides:
    n_par: int | None = None
    n_perp: int | None = None
    box: float | None = None
    p_perp_max: float | None = None

    def resolve(self, configs) -> MomentumGrid:
        """One grid covering the potential excursion of every config."""
        n_par = self.n_par or 512
        n_perp = self.n_perp or 128
        p_perp_max = self.p_perp_max or 3.0
        if self.box is not None:
            return MomentumGrid.symmetric(self.box, n_par, p_perp_max, n_perp)
        grids = [default_grid(c, n_par, n_perp, p_perp_max) for c in configs]
        return max(grids, key=lambda g: g.p_par_max)


@dataclass(frozen=True)
class SweepSpec:
    """Parameter sweep over one config axis.

    ``points`` must be non-empty and strictly monotone. ``baselines`` lists
    which reference densities to compute per point: ``n1`` (weak term off)
    and/or ``n2`` (strong term off).
    """

    base: PulseConfig
    axis: str
    points: tuple[float, ...]
    baselines: frozenset = frozenset({"n1", "n2"})

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"sweep_axis must be one of {sorted(SWEEP_AXES)}, got {self.axis!r}")
        if not self.points:
            raise ConfigError("sweep needs at least one point")
        diffs = np.diff(np.asarray(self.points, dtype=float))
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ConfigError("sweep points must be strictly monotone")
        unknown = set(self.baselines) - {"n1", "n2"}
        if unknown:
            raise ConfigError(f"unknown baseline(s) {sorted(unknown)}; use n1, n2")

    def configs(self) -> list[PulseConfig]:
        attr = SWEEP_AXES[self.axis]
        return [validate(replace(self.base, **{attr: float(x)})) for x in self.points]


@dataclass
class RunConfig:
    pulse: PulseConfig
    settings: IntegratorSettings
    grid: GridOverrides
    sweep: SweepSpec | None
    raw: dict = field(default_factory=dict)


def _coerce(key, text):
    text = text.strip()
    if key == "model" or key == "sweep_axis":
        return text
    if key in ("sweep_points", "sweep_range", "sweep_baselines"):
        return text
    if key in GRID_KEYS:
        value = float(text)
        if GRID_KEYS[key] is int:
            if not value.is_integer():
                raise ValueError(f"expected an integer, got {text!r}")
            return int(value)
        return value
    return float(text)


def _check_key(key, where):
    if key not in VALID_KEYS:
        near = difflib.get_close_matches(key, VALID_KEYS, n=1, cutoff=0.0)
        hint = f"; did you mean {near[0]!r}?" if near else ""
        raise UnknownKey(f"unknown key {key!r} ({where}){hint}")


def parse_flat_text(text: str, source: str = "<text>") -> dict:
    """Parse ``key = value`` lines (``#`` starts a comment)."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        _check_key(key, f"{source}:{lineno}")
        try:
            values[key] = _coerce(key, value)
        except ValueError as exc:
            raise ParseError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return values


def parse_json(text: str, source: str = "<json>") -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ParseError(f"{source}: top level must be an object")
    values = {}
    for key, value in data.items():
        _check_key(key, source)
        if isinstance(value, (dict, list)) and key != "sweep_points":
            raise ParseError(f"{source}: key {key!r} must be a scalar")
        if key == "sweep_points" and isinstance(value, list):
            value = ",".join(repr(float(v)) for v in value)
        try:
            values[key] = _coerce(key, str(value))
        except ValueError as exc:
            raise ParseError(f"{source}: bad value for {key!r}: {exc}") from None
    return values


def _parse_points(values) -> tuple[float, ...]:
    if "sweep_points" in values and "sweep_range" in values:
        raise ConfigError("give either sweep_points or sweep_range, not both")
    if "sweep_points" in values:
        try:
            return tuple(float(x) for x in values["sweep_points"].split(",") if x.strip())
        except ValueError:
            raise ParseError(f"bad sweep_points {values['sweep_points']!r}") from None
    spec = values.get("sweep_range")
    if spec is None:
        raise ConfigError("sweep needs sweep_points or sweep_range")
    try:
        kind, a, b, n = spec.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise ParseError(f"sweep_range must look like 'lin:a:b:n' or 'log:a:b:n', got {spec!r}") from None
    if kind == "lin":
        return tuple(float(x) for x in np.linspace(a, b, n))
    if kind == "log":
        if a <= 0 or b <= 0:
            raise ConfigError("log sweep_range needs positive end points")
        return tuple(float(x) for x in np.geomspace(a, b, n))
    raise ParseError(f"sweep_range kind must be lin or log, got {kind!r}")


def parse_config(path: str | Path | None = None, overrides=(), need_sweep: bool = False) -> RunConfig:
    """Resolve defaults < file < ``key=value`` overrides into a :class:`RunConfig`."""
    values: dict = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ParseError(f"cannot read config {path}: {exc.strerror}") from None
        if text.lstrip().startswith("{"):
            values.update(parse_json(text, str(path)))
        else:
            values.update(parse_flat_text(text, str(path)))
    for i, item in enumerate(overrides, start=1):
        if "=" not in item:
            raise ParseError(f"--set #{i}: expected key=value, got {item!r}")
        values.update(parse_flat_text(item, f"--set #{i}"))

    physics = {PHYSICS_KEYS[k]: v for k, v in values.items() if k in PHYSICS_KEYS}
    try:
        pulse = validate(PulseConfig(**physics))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    try:
        settings = IntegratorSettings(**{k: values[k] for k in INTEGRATOR_KEYS if k in values})
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    grid = GridOverrides(
        values.get("grid_npar"), values.get("grid_nperp"), values.get("grid_box"), values.get("grid_pperp_max")
    )
    sweep = None
    if need_sweep or any(k in values for k in SWEEP_KEYS):
        baselines_text = values.get("sweep_baselines", "n1,n2")
        baselines = frozenset() if baselines_text.strip() == "none" else frozenset(
            b.strip() for b in baselines_text.split(",") if b.strip()
        )
        sweep = SweepSpec(pulse, values.get("sweep_axis", "k_E"), _parse_points(values), baselines)
        sweep.configs()  # validate every point up front
    return RunConfig(pulse, settings, grid, sweep, values)


# -- output -------------------------------------------------------------------

def _format_row(row) -> str:
    out = []
    for value in row:
        if isinstance(value, str):
            out.append(value)
        else:
            out.append(FLOAT_FMT % value)
    return ",".join(out)


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)] + [_format_row(r) for r in rows]
    payload = "\n".join(lines) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(payload)
    else:
        with open(path, "w", newline="\n") as fh:
            fh.write(payload)


@dataclass
class RunManifest:
    """Provenance record written next to every output file."""

    command: str
    output: str
    config: dict
    integrator: dict
    grid: dict | None = None
    sweep: dict | None = None
    point_flags: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    wall_time_s: float = 0.0
    version: str = __version__
    backend: str = DEFAULT_BACKEND

    def write(self, out) -> None:
        text = json.dumps(self.__dict__, indent=2, sort_keys=True, default=_json_default) + "\n"
        if out is None or str(out) == "-":
            sys.stderr.write(text)
        else:
            Path(str(out) + ".manifest.json").write_text(text)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"not serialisable: {type(obj).__name__}")


# -- commands -------------------------------------------------------------------

def cmd_field(run: RunConfig, t_min: float | None, t_max: float | None, samples: int, out):
    if samples < 1:
        raise ConfigError("--samples must be >= 1")
    lo, hi = run.pulse.window(run.settings.window_halfwidth_factor)
    t_min = lo if t_min is None else t_min
    t_max = hi if t_max is None else t_max
    if t_max < t_min:
        raise ConfigError("t range must satisfy t_min <= t_max")
    t = np.array([0.5 * (t_min + t_max)]) if samples == 1 else np.linspace(t_min, t_max, samples)
    E = np.asarray(eval_E(run.pulse, t), dtype=float)
    eA = np.asarray(eval_eA(run.pulse, t), dtype=float)
    write_csv(out, ["t [1/m]", "E [E_c]", "eA [m]"], zip(t, E, eA))
    return {"samples": int(samples), "t_min": float(t[0]), "t_max": float(t[-1])}, []


def cmd_mode(run: RunConfig, p_par: float, p_perp: float, stride: int, out):
    settings = replace(run.settings, trajectory_stride=stride)
    result = evolve_mode(MomentumMode(p_par, p_perp), run.pulse, settings)
    t, f = result.trajectory
    write_csv(out, ["t [1/m]", "f [1]"], zip(t, f))
    summary = {
        "p_par": p_par,
        "p_perp": p_perp,
        "f_final": result.f_final,
        "constraint_drift": result.constraint_drift,
        "n_steps": result.n_steps,
        "n_rejected": result.n_rejected,
    }
    print(f"f_final = {result.f_final:.15e}  steps = {result.n_steps}  drift = {result.constraint_drift:.3e}",
          file=sys.stderr)
    return summary, []


def cmd_grid(run: RunConfig, slice_kind: str, workers: int, out):
    grid = run.grid.resolve([run.pulse])
    if slice_kind == "full":
        dist = residual_distribution(run.pulse, grid, run.settings, workers)
    elif slice_kind == "ppar":
        dist = momentum_slice(run.pulse, SliceAxis.P_PAR_AT_PPERP0, grid.p_par, run.settings, workers)
    else:
        dist = momentum_slice(run.pulse, SliceAxis.P_PERP_AT_PPAR0, grid.p_perp, run.settings, workers)
    rows = [(a, b, value) for (a, b), value in dist.values()]
    write_csv(out, ["p_par [m]", "p_perp [m]", "f [1]"], rows)
    summary = {"slice": slice_kind, "nodes": len(rows), "max_f": float(np.max(dist.f)),
               "max_drift": dist.max_drift, "grid": grid.to_dict()}
    if slice_kind == "full":
        estimate = density_with_diagnostics(dist, grid)
        summary.update(n=estimate.n, resolution_delta=estimate.resolution_delta,
                       edge_fraction=estimate.edge_fraction, flags=estimate.flags())
    return summary, []


def _sweep_jobs(spec: SweepSpec):
    """Per point: (combined, strong-only or None, weak-only or None)."""
    jobs = []
    for config in spec.configs():
        n1 = strong_only(config) if "n1" in spec.baselines else None
        n2 = weak_only(config) if "n2" in spec.baselines else None
        jobs.append((config, n1, n2))
    return jobs


def run_sweep(spec: SweepSpec, grid: MomentumGrid, settings: IntegratorSettings, workers: int = 1):
    """Evaluate a sweep; returns a list of :class:`ScanResult` in point order.

    All distinct configs (points plus baselines, deduplicated, so a baseline
    that does not depend on the axis is solved once) are flattened into one
    task list over (config x grid node) and solved in a single pool.
    """
    jobs = _sweep_jobs(spec)
    unique: list[PulseConfig] = []
    for triple in jobs:
        for config in triple:
            if config is not None and config not in unique:
                unique.append(config)
    nodes = grid.nodes()
    tasks = [(config, a, b) for config in unique for a, b in nodes]
    f, _, drift, errors = solve_modes(tasks, settings, workers, raise_on_error=False)
    n_nodes = len(nodes)

    densities = {}
    for k, config in enumerate(unique):
        block = slice(k * n_nodes, (k + 1) * n_nodes)
        failed = [idx - k * n_nodes for idx in errors if block.start <= idx < block.stop]
        if failed:
            a, b = nodes[min(failed)]
            densities[config] = (math.nan, f"failed@p_par={a:.6g};p_perp={b:.6g}")
            continue
        dist = DistributionSlice(SliceAxis.FULL_2D, grid.p_par, grid.p_perp,
                                 f[block].reshape(grid.shape), drift=drift[block])
        est = density_with_diagnostics(dist, grid)
        densities[config] = (est.n, est.flags())

    attr = SWEEP_AXES[spec.axis]
    results = []
    for config, c1, c2 in jobs:
        n, flag = densities[config]
        flags = [] if flag == "ok" else [flag]
        n1, f1 = densities[c1] if c1 is not None else (math.nan, "ok")
        n2, f2 = densities[c2] if c2 is not None else (math.nan, "ok")
        flags += [f"n1:{f1}"] if f1 != "ok" else []
        flags += [f"n2:{f2}"] if f2 != "ok" else []
        r = n / n1 if c1 is not None and n1 > 0 else math.nan
        eff = n / (n1 + n2) if c1 is not None and c2 is not None and (n1 + n2) > 0 else math.nan
        results.append(ScanResult(
            coordinate=getattr(config, attr), n=n, N=n / config.omega ** 3, r=r, net_eff=eff,
            n_strong=n1, n_weak=n2, flags="|".join(flags) if flags else "ok",
        ))
    return results


def cmd_sweep(run: RunConfig, workers: int, out):
    spec = run.sweep
    configs = spec.configs()
    grid = run.grid.resolve(configs)
    results = run_sweep(spec, grid, run.settings, workers)
    header = [f"{spec.axis} [1]" if spec.axis != "omega_over_m" else "omega [m]",
              "n [m^3]", "N [1]", "r [1]", "net_eff [1]", "n_1 [m^3]", "n_2 [m^3]", "flags"]
    order = np.argsort([res.coordinate for res in results], kind="stable")
    rows = [(res.coordinate, res.n, res.N, res.r, res.net_eff, res.n_strong, res.n_weak, res.flags)
            for res in (results[i] for i in order)]
    write_csv(out, header, rows)
    flags = [{"point": res.coordinate, "flags": res.flags} for res in results]
    summary = {"points": len(results), "grid": grid.to_dict()}
    return summary, flags


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or flat key=value config file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable, wins over --config)")
    common.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")

    gridopts = argparse.ArgumentParser(add_help=False)
    gridopts.add_argument("--workers", type=int, default=1, help="worker processes (0 = all cores)")
    gridopts.add_argument("--grid-npar", type=int)
    gridopts.add_argument("--grid-nperp", type=int)
    gridopts.add_argument("--grid-box", type=float, help="p_par half-width of the grid, units of m")
    gridopts.add_argument("--grid-pperp-max", type=float)

    parser = argparse.ArgumentParser(prog="schwinger-qke", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("field", parents=[common], help="sample E(t) and eA(t)")
    p.add_argument("--t-min", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--samples", type=int, default=2001)

    p = sub.add_parser("mode", parents=[common], help="evolve one momentum mode, write f(t)")
    p.add_argument("--p-par", type=float, default=0.0)
    p.add_argument("--p-perp", type=float, default=0.0)
    p.add_argument("--stride", type=int, default=100, help="record every N-th accepted step")

    p = sub.add_parser("grid", parents=[common, gridopts], help="residual distribution on a momentum grid")
    p.add_argument("--slice", choices=("full", "ppar", "pperp"), default="full")

    sub.add_parser("sweep", parents=[common, gridopts], help="pair density sweep over one parameter")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        run = parse_config(args.config, args.overrides, need_sweep=args.command == "sweep")
        if args.command in ("grid", "sweep"):
            run.grid = GridOverrides(
                args.grid_npar or run.grid.n_par,
                args.grid_nperp or run.grid.n_perp,
                args.grid_box if args.grid_box is not None else run.grid.box,
                args.grid_pperp_max if args.grid_pperp_max is not None else run.grid.p_perp_max,
            )
        if args.command == "field":
            summary, flags = cmd_field(run, args.t_min, args.t_max, args.samples, args.out)
        elif args.command == "mode":
            summary, flags = cmd_mode(run, args.p_par, args.p_perp, max(1, args.stride), args.out)
        elif args.command == "grid":
            summary, flags = cmd_grid(run, args.slice, args.workers, args.out)
        else:
            summary, flags = cmd_sweep(run, args.workers, args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    manifest = RunManifest(
        command=args.command,
        output=str(args.out),
        config=run.pulse.to_dict(),
        integrator=run.settings.to_dict(),
        grid=summary.get("grid"),
        sweep=None if run.sweep is None else {
            "axis": run.sweep.axis, "points": list(run.sweep.points), "baselines": run.sweep.baselines},
        point_flags=flags,
        summary=summary,
        wall_time_s=round(time.perf_counter() - start, 3),
    )
    manifest.write(args.out)
    if any(item["flags"].startswith("failed") or "failed@" in item["flags"] for item in flags):
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
