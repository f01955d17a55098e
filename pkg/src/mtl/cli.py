"""Command-line front end.

One config file describes one run; subcommands pick what to compute:

    mtl simulate     run.toml   # time evolution -> trajectory CSV
    mtl equilibrium  run.toml   # multi-start attractor search -> CSV
    mtl fixed-points run.toml   # green-share fixed points -> CSV
    mtl sweep2d      run.toml   # parameter grid -> CSV
    mtl hysteresis   run.toml   # dual-branch 1-D scan -> CSV
    mtl surface      run.toml   # dual-branch 2-D scan -> CSV

Config files are TOML; unknown keys are rejected so a typo cannot silently
fall back to a default.  Scalar keys can be overridden from the command
line (``--k``, ``--lambda``); ``--jobs`` (or the MTL_JOBS environment
variable) caps sweep workers.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ._util import fmt9, join_ids
from .distributions import distribution_from_config
from .dynamics import DEFAULT_T_MAX, DEFAULT_TOL, Intervention, simulate
from .equilibrium import (
    equilibrium_numeric,
    green_fixed_points,
    write_equilibria_csv,
)
from .market import MarketParams, ProductSpec, parse_param_path
from .sweep import (
    DEFAULT_HYSTERESIS_STEPS,
    Axis,
    SweepSpec,
    hysteresis_sweep,
    surface,
    sweep2d,
)

SUBCOMMANDS = ("simulate", "equilibrium", "fixed-points", "sweep2d", "hysteresis", "surface")


class ConfigError(Exception):
    """Invalid run configuration; the message names the offending key."""


def _check_keys(block: dict, allowed: set, context: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown key '{sorted(unknown)[0]}' in {context}")


def _require(block: dict, key: str, context: str):
    if key not in block:
        raise ConfigError(f"missing key '{key}' in {context}")
    return block[key]


def _number(block: dict, key: str, context: str) -> float:
    value = _require(block, key, context)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"key '{key}' in {context} must be a number")
    return float(value)


class RunConfig:
    """Validated run configuration built from a TOML file."""

    TOP_KEYS = {
        "distribution",
        "products",
        "k",
        "lambda",
        "initial",
        "t_max",
        "tol",
        "schedule",
        "sweep",
        "hysteresis",
        "surface",
    }

    def __init__(self, raw: dict):
        _check_keys(raw, self.TOP_KEYS, "config")
        dist_block = _require(raw, "distribution", "config")
        try:
            wtp = distribution_from_config(dist_block)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

        products_block = _require(raw, "products", "config")
        if not isinstance(products_block, list) or not products_block:
            raise ConfigError("key 'products' must be a non-empty array of tables")
        products = []
        for i, entry in enumerate(products_block):
            context = f"products[{i}]"
            _check_keys(entry, {"name", "p0"}, context)
            name = entry.get("name", f"product{i}")
            p0 = _number(entry, "p0", context)
            products.append(ProductSpec(id=i, name=str(name), p0=p0))

        k = _number(raw, "k", "config")
        lam = _number(raw, "lambda", "config")
        try:
            self.params = MarketParams(products=tuple(products), k=k, lam=lam, wtp=wtp)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

        self.initial = None
        if "initial" in raw:
            initial = raw["initial"]
            if not isinstance(initial, list) or len(initial) != self.params.n:
                raise ConfigError(
                    f"key 'initial' must list one share per product ({self.params.n})"
                )
            self.initial = np.array([float(x) for x in initial])

        self.t_max = int(raw.get("t_max", DEFAULT_T_MAX))
        self.tol = float(raw.get("tol", DEFAULT_TOL))
        if self.t_max < 1:
            raise ConfigError("key 't_max' must be >= 1")
        if not self.tol > 0:
            raise ConfigError("key 'tol' must be > 0")

        self.schedule = self._parse_schedule(raw.get("schedule", []))
        self.sweep_block = raw.get("sweep")
        self.hysteresis_block = raw.get("hysteresis")
        self.surface_block = raw.get("surface")

    def _parse_schedule(self, block) -> tuple:
        if not isinstance(block, list):
            raise ConfigError("key 'schedule' must be an array of tables")
        out = []
        for i, entry in enumerate(block):
            context = f"schedule[{i}]"
            _check_keys(entry, {"t_start", "t_end", "target", "value", "delta"}, context)
            target = str(_require(entry, "target", context))
            if ("value" in entry) == ("delta" in entry):
                raise ConfigError(f"{context} needs exactly one of 'value' or 'delta'")
            mode = "set" if "value" in entry else "add"
            amount = _number(entry, "value" if mode == "set" else "delta", context)
            try:
                parse_param_path(target, self.params.n)
                out.append(
                    Intervention(
                        t_start=int(_number(entry, "t_start", context)),
                        t_end=int(_number(entry, "t_end", context)),
                        target=target,
                        value=amount,
                        mode=mode,
                    )
                )
            except ValueError as exc:
                raise ConfigError(f"{context}: {exc}") from exc
        return tuple(out)

    def _parse_axis(self, block: dict, context: str, default_param: "str | None" = None) -> Axis:
        allowed = {"param", "min", "max", "steps"}
        _check_keys(block, allowed, context)
        param = block.get("param", default_param)
        if param is None:
            raise ConfigError(f"missing key 'param' in {context}")
        try:
            parse_param_path(str(param), self.params.n)
            return Axis(
                param=str(param),
                start=_number(block, "min", context),
                stop=_number(block, "max", context),
                steps=int(_number(block, "steps", context)),
            )
        except ValueError as exc:
            raise ConfigError(f"{context}: {exc}") from exc

    def sweep_spec(self) -> SweepSpec:
        if self.sweep_block is None:
            raise ConfigError("missing table [sweep] in config")
        block = self.sweep_block
        _check_keys(block, {"axis1", "axis2", "initial_conditions", "protocol"}, "[sweep]")
        axis1 = self._parse_axis(_require(block, "axis1", "[sweep]"), "sweep.axis1")
        axis2 = None
        if "axis2" in block:
            axis2 = self._parse_axis(block["axis2"], "sweep.axis2")
        initial_conditions = None
        if "initial_conditions" in block:
            rows = block["initial_conditions"]
            if not isinstance(rows, list) or not rows:
                raise ConfigError("key 'initial_conditions' in [sweep] must be a non-empty array")
            initial_conditions = tuple(np.array([float(x) for x in row]) for row in rows)
            for row in initial_conditions:
                if len(row) != self.params.n:
                    raise ConfigError(
                        "each entry of 'initial_conditions' in [sweep] must list "
                        f"one share per product ({self.params.n})"
                    )
        try:
            return SweepSpec(
                base=self.params,
                axis1=axis1,
                axis2=axis2,
                initial_conditions=initial_conditions,
                protocol=str(block.get("protocol", "independent-init")),
            )
        except ValueError as exc:
            raise ConfigError(f"[sweep]: {exc}") from exc

    def hysteresis_args(self) -> dict:
        if self.hysteresis_block is None:
            raise ConfigError("missing table [hysteresis] in config")
        block = self.hysteresis_block
        _check_keys(block, {"param", "min", "max", "steps", "protocol"}, "[hysteresis]")
        args = dict(
            start=_number(block, "min", "[hysteresis]"),
            stop=_number(block, "max", "[hysteresis]"),
            steps=int(_number(block, "steps", "[hysteresis]"))
            if "steps" in block
            else DEFAULT_HYSTERESIS_STEPS,
            protocol=str(block.get("protocol", "independent-init")),
        )
        if "param" in block:
            try:
                parse_param_path(str(block["param"]), self.params.n)
            except ValueError as exc:
                raise ConfigError(f"[hysteresis]: {exc}") from exc
            args["axis_param"] = str(block["param"])
        return args

    def surface_axes(self) -> tuple:
        if self.surface_block is None:
            raise ConfigError("missing table [surface] in config")
        block = self.surface_block
        _check_keys(block, {"k", "p0_top"}, "[surface]")

        def axis_triplet(key: str) -> tuple:
            sub = _require(block, key, "[surface]")
            context = f"surface.{key}"
            _check_keys(sub, {"min", "max", "steps"}, context)
            return (
                _number(sub, "min", context),
                _number(sub, "max", context),
                int(_number(sub, "steps", context)),
            )

        return axis_triplet("k"), axis_triplet("p0_top")


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc
    return RunConfig(raw)


def _resolve_out(args, subcommand: str) -> str:
    if args.out is not None:
        return args.out
    return os.path.join("out", f"{subcommand}.csv")


def _resolve_jobs(args) -> "int | None":
    if args.jobs is not None:
        return args.jobs
    env = os.environ.get("MTL_JOBS")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"MTL_JOBS must be an integer, got {env!r}") from exc
    return None


def _write(out_path: str, writer) -> None:
    parent = os.path.dirname(out_path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    writer(out_path)


def _shares_text(u) -> str:
    return "(" + ", ".join(fmt9(x) for x in u) + ")"


def _cmd_simulate(cfg: RunConfig, args) -> int:
    traj = simulate(
        cfg.params,
        initial=cfg.initial,
        t_max=cfg.t_max,
        tol=cfg.tol,
        schedule=cfg.schedule,
    )
    out = _resolve_out(args, "simulate")
    _write(out, traj.write_csv)
    if traj.converged:
        print(
            f"converged at t={traj.t_converged}: shares {_shares_text(traj.final_u)}, "
            f"non-buyers {fmt9(traj.nonbuyers[-1])}, survivors "
            f"[{join_ids(traj.survivors[-1])}]; trajectory written to {out}"
        )
        return 0
    print(
        f"did not converge within t_max={cfg.t_max} (tol {cfg.tol:g}); last shares "
        f"{_shares_text(traj.final_u)}; trajectory written to {out}"
    )
    return 2


def _cmd_equilibrium(cfg: RunConfig, args) -> int:
    initials = [cfg.initial] if cfg.initial is not None else None
    scan = equilibrium_numeric(cfg.params, initials=initials, t_max=cfg.t_max, tol=cfg.tol)
    out = _resolve_out(args, "equilibrium")
    _write(out, lambda p: write_equilibria_csv(scan.equilibria, p))
    parts = [
        f"equilibrium {i}: shares {_shares_text(eq.u)} (residual {fmt9(eq.residual)})"
        for i, eq in enumerate(scan.equilibria)
    ]
    print(
        f"{len(scan.equilibria)} distinct equilibrium(s) found; "
        + "; ".join(parts)
        + f"; report written to {out}"
    )
    if scan.nonconverged:
        print(f"warning: {len(scan.nonconverged)} start(s) did not converge")
        return 2
    return 0


def _cmd_fixed_points(cfg: RunConfig, args) -> int:
    fps = green_fixed_points(cfg.params.wtp, cfg.params.top_p0, cfg.params.k)
    out = _resolve_out(args, "fixed-points")
    _write(out, fps.write_csv)
    desc = ", ".join(
        f"{fmt9(p.u_star)} ({'stable' if p.stable else 'unstable'})" for p in fps.points
    )
    sep = f"; separatrix at {fmt9(fps.separatrix)}" if fps.separatrix is not None else ""
    print(f"{len(fps.points)} fixed point(s) for the greenest product: {desc}{sep}; written to {out}")
    return 0


def _cmd_sweep2d(cfg: RunConfig, args) -> int:
    result = sweep2d(cfg.sweep_spec(), t_max=cfg.t_max, tol=cfg.tol, jobs=_resolve_jobs(args))
    out = _resolve_out(args, "sweep2d")
    _write(out, result.write_csv)
    total = result.converged.size
    print(
        f"swept {result.u.shape[0]}x{result.u.shape[1]} grid "
        f"({int(result.converged.sum())}/{total} runs converged); surviving-product counts "
        f"range {int(result.survivor_count.min())}..{int(result.survivor_count.max())}; "
        f"written to {out}"
    )
    return 0


def _cmd_hysteresis(cfg: RunConfig, args) -> int:
    result = hysteresis_sweep(
        cfg.params, t_max=cfg.t_max, tol=cfg.tol, jobs=_resolve_jobs(args), **cfg.hysteresis_args()
    )
    out = _resolve_out(args, "hysteresis")
    _write(out, result.write_csv)
    if result.window is not None:
        print(
            f"hysteresis window over {result.axis_param}: "
            f"({fmt9(result.window[0])}, {fmt9(result.window[1])}); written to {out}"
        )
    else:
        print(f"no hysteresis window: branches coincide everywhere; written to {out}")
    return 0


def _cmd_surface(cfg: RunConfig, args) -> int:
    k_axis, p0_axis = cfg.surface_axes()
    result = surface(
        cfg.params, k_axis, p0_axis, t_max=cfg.t_max, tol=cfg.tol, jobs=_resolve_jobs(args)
    )
    out = _resolve_out(args, "surface")
    _write(out, result.write_csv)
    top = cfg.params.n - 1
    diff = np.abs(result.u[:, :, 0, top] - result.u[:, :, 1, top]) > 1e-3
    print(
        f"surface over (k, p0[{top}]): {int(diff.sum())} of {diff.size} cells are bistable; "
        f"written to {out}"
    )
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "equilibrium": _cmd_equilibrium,
    "fixed-points": _cmd_fixed_points,
    "sweep2d": _cmd_sweep2d,
    "hysteresis": _cmd_hysteresis,
    "surface": _cmd_surface,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtl",
        description="Market transition lab: simulate and analyze ranked-product competition",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="path to a TOML run configuration")
        p.add_argument("--k", type=float, default=None, help="override the returns coefficient")
        p.add_argument(
            "--lambda", dest="lam", type=float, default=None, help="override the relaxation rate"
        )
        p.add_argument("--out", default=None, help="output CSV path (default out/<subcommand>.csv)")
        p.add_argument(
            "--jobs",
            type=int,
            default=None,
            help="max parallel workers for sweeps (default: MTL_JOBS or all cores)",
        )
    return parser


def run(argv) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        try:
            if args.k is not None:
                cfg.params = dataclasses.replace(cfg.params, k=args.k)
            if args.lam is not None:
                cfg.params = dataclasses.replace(cfg.params, lam=args.lam)
            return _COMMANDS[args.subcommand](cfg, args)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))
