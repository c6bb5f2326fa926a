"""Command-line front end: figure data as CSV, plus the self-test runner.

Configuration is layered: built-in defaults, then an optional ``key = value``
file (``--config``), then command-line flags, which win.  See README for the
key grammar.

Exit codes: 0 success, 2 configuration error, 3 divergence reported,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .greens import SingularMatrixError
from .medium import ExponentialCore, Layer, Multilayer, SpectralPoint, ThreeLayer, epsilon_at, named_profile
from .regular import parse_reg_mode, subtraction_of
from .selftest import SUITES, run as run_selftest
from .stress import (
    Converged,
    DivergenceReport,
    DivergentTail,
    InconclusiveTailError,
    InsufficientDataError,
    PointFailure,
    QuadratureSpec,
    force_per_area,
    force_per_volume,
    integrand_derivative_scan,
    integrand_grid,
    stress_profile,
)

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENT, EXIT_NUMERIC = 0, 2, 3, 4

COMMANDS = ("integrand", "stress", "force", "threelayer", "profile", "selftest")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# option table: config key, flag, help.  Values stay strings until validated.

_PROFILE = [("profile", "--profile", "fig3 | fig10 | exp:EPS_LEFT,B,X_RIGHT | three:EL,EC,ER,XL,XR | layers:X:EPS[:MU];...")]
_MODE = [
    ("reg", "--reg", "standard | wkb | none (none needs --u-max)"),
    ("u_max", "--u-max", "hard cutoff on u"),
]
_QUAD = [
    ("c", "--c", "speed of light (default 1)"),
    ("rel_tol", "--rel-tol", "relative tolerance"),
    ("abs_tol", "--abs-tol", "absolute tolerance"),
    ("max_evals", "--max-evals", "integrand evaluation budget per stress value"),
    ("u_transform", "--u-transform", "rational | tangent"),
    ("xi_transform", "--xi-transform", "rational | tangent"),
    ("tail_probe", "--tail-probe", "comma-separated u probes"),
    ("workers", "--workers", "parallel worker processes (default: CASIMIR1D_THREADS or all cores)"),
]
_OUTPUT = [("output", "--output", "output path (default stdout)")]

_SPECIFIC = {
    "integrand": _PROFILE + _MODE + _OUTPUT + [("c", "--c", "speed of light (default 1)")] + [
        ("x", "--x", "positions (list or grid)"),
        ("u_grid", "--u-grid", "u scan, e.g. log:0.01:200:120"),
        ("xi", "--xi", "fixed xi for the u scan"),
        ("xi_grid", "--xi-grid", "xi scan"),
        ("u", "--u", "fixed u for the xi scan"),
        ("quantity", "--quantity", "integrand | derivative (x-derivative, standard subtraction)"),
        ("step", "--step", "finite-difference step for --quantity derivative"),
    ],
    "stress": _PROFILE + _MODE + _QUAD + _OUTPUT + [("x", "--x", "positions (list or grid, e.g. interior:21)")],
    "force": _PROFILE + _MODE + _QUAD + _OUTPUT + [
        ("x", "--x", "positions (list or grid)"),
        ("fit_degree", "--fit-degree", "polynomial degree of the stress fit"),
        ("slab", "--slab", "slab ends: force per area instead of density (config: X1,X2)"),
    ],
    "threelayer": _QUAD + _OUTPUT + [
        ("eps", "--eps", "EL,EC,ER"),
        ("gap", "--gap", "gap width"),
        ("x", "--x", "positions (default: lin:-gap:2*gap:31)"),
    ],
    "profile": _PROFILE + _OUTPUT + [("x", "--x", "positions")],
    "selftest": _OUTPUT + [
        ("suite", "--suite", f"comma-separated subset of {', '.join(SUITES)}"),
        ("layers", "--layers", "staircase size for the oracle suite"),
    ],
}

_DEFAULTS = {
    "profile": "fig3",
    "reg": "standard",
    "c": "1",
    "rel_tol": "1e-4",
    "abs_tol": "1e-8",
    "max_evals": "4000000",
    "u_transform": "rational",
    "xi_transform": "rational",
    "quantity": "integrand",
    "step": "1e-4",
    "fit_degree": "8",
    "eps": "3,2,1.5",
    "gap": "1",
    "layers": "500",
}


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; keys are case-sensitive."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {n}: empty key")
        out[key.replace("-", "_")] = value
    return out


def _profile_from_keys(cfg: dict) -> Optional[str]:
    """Translate ``profile.kind`` style keys into a compact profile spec."""
    kind = cfg.pop("profile.kind", None)
    fields = {k: cfg.pop(k) for k in list(cfg) if k.startswith("profile.")}
    if kind is None:
        if fields:
            raise ConfigError("profile.* keys need profile.kind")
        return None
    get = lambda k: fields.get(f"profile.{k}") or _missing(k)  # noqa: E731
    if kind in ("fig3", "fig10"):
        return kind
    if kind == "exponential":
        return f"exp:{get('eps_left')},{get('b')},{get('x_right')}"
    if kind == "three_layer":
        return f"three:{get('eps_left')},{get('eps_center')},{get('eps_right')},{get('x_left')},{get('x_right')}"
    if kind == "multilayer":
        return f"layers:{get('layers')}"
    raise ConfigError(f"unknown profile.kind {kind!r}")


def _missing(key):
    raise ConfigError(f"missing profile.{key}")


def parse_profile(spec: str):
    spec = spec.strip()
    if spec in ("fig3", "fig10"):
        return named_profile(spec)
    kind, _, body = spec.partition(":")
    try:
        if kind == "exp":
            eps, b, xr = (float(v) for v in body.split(","))
            return ExponentialCore(eps, b, xr)
        if kind == "three":
            el, ec, er, xl, xr = (float(v) for v in body.split(","))
            return ThreeLayer(el, ec, er, xl, xr)
        if kind == "layers":
            layers = []
            for item in body.split(";"):
                parts = [float(v) for v in item.split(":")]
                if len(parts) not in (2, 3):
                    raise ValueError("layer entries are X:EPS or X:EPS:MU")
                layers.append(Layer(*parts))
            return Multilayer(tuple(layers))
    except ValueError as exc:
        raise ConfigError(f"bad profile {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown profile {spec!r}")


def parse_grid(spec: str, x_right: Optional[float] = None) -> list:
    """``a,b,c`` | ``lin:A:B:N`` | ``log:A:B:N`` | ``interior:N`` (needs a core)."""
    spec = spec.strip()
    if not spec:
        return []
    head, _, rest = spec.partition(":")
    try:
        if head in ("lin", "log"):
            a, b, n = rest.split(":")
            a, b, n = float(a), float(b), int(n)
            if n < 1:
                raise ValueError("need at least one point")
            if head == "log":
                if a <= 0 or b <= 0:
                    raise ValueError("log grids need positive ends")
                return [float(v) for v in np.geomspace(a, b, n)]
            return [float(v) for v in np.linspace(a, b, n)]
        if head == "interior":
            if x_right is None:
                raise ValueError("interior grids need an exponential core")
            n = int(rest)
            if n < 1:
                raise ValueError("need at least one point")
            return [x_right * k / (n + 1) for k in range(1, n + 1)]
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {spec!r}: {exc}") from exc


def _float(cfg, key, positive=False):
    try:
        v = float(cfg[key])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{key} must be a number") from exc
    if positive and not v > 0:
        raise ConfigError(f"{key} must be positive")
    return v


@dataclass
class RunConfig:
    command: str
    values: dict

    @property
    def recorded(self) -> dict:
        """Values that determine the numbers (the output path does not)."""
        return {k: v for k, v in self.values.items() if k != "output"}

    @property
    def digest(self) -> str:
        canon = json.dumps({"command": self.command, **self.recorded}, sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def build_config(command: str, file_values: dict, flag_values: dict) -> RunConfig:
    values = dict(_DEFAULTS)
    file_values = dict(file_values)
    file_values.pop("command", None)
    spec = _profile_from_keys(file_values)
    if spec is not None:
        file_values["profile"] = spec
    allowed = {k for k, _, _ in _SPECIFIC[command]}
    unknown = sorted(set(file_values) - allowed)
    if unknown:
        raise ConfigError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
    values.update(file_values)
    values.update({k: v for k, v in flag_values.items() if v is not None})
    return RunConfig(command, {k: v for k, v in values.items() if k in allowed})


def _quad(cfg: dict) -> QuadratureSpec:
    try:
        kwargs = dict(
            u_transform=cfg["u_transform"],
            xi_transform=cfg["xi_transform"],
            rel_tol=_float(cfg, "rel_tol", True),
            abs_tol=_float(cfg, "abs_tol", True),
            max_evals=int(cfg["max_evals"]),
        )
        if cfg.get("tail_probe"):
            kwargs["tail_probe"] = tuple(parse_grid(cfg["tail_probe"]))
        return QuadratureSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _mode(cfg: dict):
    u_max = _float(cfg, "u_max", True) if cfg.get("u_max") else None
    try:
        return parse_reg_mode(cfg["reg"], u_max)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _mode_label(mode) -> str:
    sub = subtraction_of(mode) or "none"
    return f"{sub}+cut{mode.u_max:g}" if hasattr(mode, "u_max") else sub


def _workers(cfg: dict) -> Optional[int]:
    if not cfg.get("workers"):
        return None
    try:
        n = int(cfg["workers"])
    except ValueError as exc:
        raise ConfigError("workers must be an integer") from exc
    if n < 1:
        raise ConfigError("workers must be positive")
    return n


def _x_right(profile) -> Optional[float]:
    return profile.x_right if isinstance(profile, ExponentialCore) else None


# ---------------------------------------------------------------------------
# CSV


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.17g}"


class CsvWriter:
    def __init__(self, stream, config: RunConfig, columns):
        self.stream = stream
        stream.write(f"# casimir1d {__version__}\n")
        stream.write(f"# command {config.command}\n")
        stream.write(f"# config_sha256 {config.digest}\n")
        for key in sorted(config.recorded):
            stream.write(f"# {key} = {config.recorded[key]}\n")
        stream.write(",".join(columns) + "\n")

    def row(self, *values):
        self.stream.write(",".join(fmt(v) for v in values) + "\n")

    def note(self, text: str):
        self.stream.write(f"# {text}\n")


# ---------------------------------------------------------------------------
# commands; each returns an exit code


def cmd_integrand(config: RunConfig, out) -> int:
    cfg = config.values
    profile = parse_profile(cfg["profile"])
    xs = parse_grid(cfg.get("x", ""), _x_right(profile))
    if not xs:
        raise ConfigError("integrand needs a non-empty x list")
    mode = _mode(cfg)
    c = _float(cfg, "c", True)
    scans = []
    if cfg.get("u_grid"):
        if not cfg.get("xi"):
            raise ConfigError("a u scan needs a fixed xi")
        scans += [(u, _float(cfg, "xi")) for u in parse_grid(cfg["u_grid"])]
    if cfg.get("xi_grid"):
        if not cfg.get("u"):
            raise ConfigError("a xi scan needs a fixed u")
        scans += [(_float(cfg, "u"), xi) for xi in parse_grid(cfg["xi_grid"])]
    if not scans:
        raise ConfigError("integrand needs --u-grid with --xi or --xi-grid with --u")
    if any(u < 0 or xi < 0 or (u == 0 and xi == 0) for u, xi in scans):
        raise ConfigError("scan points need u, xi >= 0, not both zero")
    quantity = cfg["quantity"]
    if quantity not in ("integrand", "derivative"):
        raise ConfigError("quantity must be integrand or derivative")
    label = _mode_label(mode) if quantity == "integrand" else "standard-dx"
    w = CsvWriter(out, config, ["x", "u", "xi", "mode", "integrand"])
    us = np.array([s[0] for s in scans])
    xis = np.array([s[1] for s in scans])
    for x in xs:
        if quantity == "integrand":
            vals = integrand_grid(x, us, xis, profile, c, subtraction_of(mode))
        else:
            step = _float(cfg, "step", True)
            vals = [integrand_derivative_scan(x, SpectralPoint(u, xi), profile, c, step) for u, xi in scans]
        for (u, xi), v in zip(scans, vals):
            w.row(x, u, xi, label, v)
    return EXIT_OK


def _outcome_fields(o):
    if isinstance(o, Converged):
        return "converged", o.value, o.err_est
    if isinstance(o, DivergentTail):
        return f"divergent_{o.axis}", o.plateau, math.nan
    return f"failed_{o.kind}", math.nan, math.nan


def cmd_stress(config: RunConfig, out) -> int:
    cfg = config.values
    profile = parse_profile(cfg["profile"])
    xs = parse_grid(cfg.get("x", ""), _x_right(profile))
    if not xs:
        raise ConfigError("stress needs a non-empty x list")
    mode = _mode(cfg)
    results = stress_profile(sorted(xs), profile, _float(cfg, "c", True), mode, _quad(cfg), _workers(cfg))
    w = CsvWriter(out, config, ["x", "mode", "outcome", "value_or_plateau", "err_est"])
    failed = False
    for x, o in results:
        kind, value, err = _outcome_fields(o)
        failed |= isinstance(o, PointFailure)
        w.row(x, _mode_label(mode), kind, value, err)
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_force(config: RunConfig, out) -> int:
    cfg = config.values
    profile = parse_profile(cfg["profile"])
    mode = _mode(cfg)
    c = _float(cfg, "c", True)
    quad = _quad(cfg)
    if cfg.get("slab"):
        ends = parse_grid(cfg["slab"])
        if len(ends) != 2 or ends[0] == ends[1]:
            raise ConfigError("slab needs two distinct positions")
        res = force_per_area(ends[0], ends[1], profile, c, mode, quad, _workers(cfg))
        w = CsvWriter(out, config, ["x1", "x2", "mode", "outcome", "force_per_area", "err_est", "divergent_at"])
        if isinstance(res, DivergenceReport):
            w.row(ends[0], ends[1], _mode_label(mode), "divergent", math.nan, math.nan,
                  ";".join(fmt(x) for x in res.endpoints))
            failed = any(isinstance(o, PointFailure) for o in res.outcomes)
            return EXIT_NUMERIC if failed else EXIT_DIVERGENT
        w.row(ends[0], ends[1], _mode_label(mode), "converged", res.value, res.err_est, "")
        return EXIT_OK
    xs = parse_grid(cfg.get("x", ""), _x_right(profile))
    if not xs:
        raise ConfigError("force needs a non-empty x list or --slab")
    try:
        degree = int(cfg["fit_degree"])
    except ValueError as exc:
        raise ConfigError("fit_degree must be an integer") from exc
    if degree < 1:
        raise ConfigError("fit_degree must be at least 1")
    xs = sorted(xs)
    outcomes = stress_profile(xs, profile, c, mode, quad, _workers(cfg))
    try:
        curve = force_per_volume(xs, profile, c, mode, quad, degree, outcomes=outcomes)
    except InsufficientDataError as exc:
        w = CsvWriter(out, config, ["x", "f"])
        diverged = sum(isinstance(o, DivergentTail) for _, o in outcomes)
        failed = sum(isinstance(o, PointFailure) for _, o in outcomes)
        w.note(f"no fit: {exc}; divergent points {diverged}, failed points {failed}")
        return EXIT_DIVERGENT if diverged and not failed else EXIT_NUMERIC
    w = CsvWriter(out, config, ["x", "f"])
    for x, f in curve:
        w.row(x, f)
    return EXIT_OK


def cmd_threelayer(config: RunConfig, out) -> int:
    cfg = config.values
    try:
        el, ec, er = (float(v) for v in cfg["eps"].split(","))
    except ValueError as exc:
        raise ConfigError("eps needs three comma-separated values") from exc
    gap = _float(cfg, "gap", True)
    if min(el, ec, er) <= 0:
        raise ConfigError("permittivities must be positive")
    xs = parse_grid(cfg.get("x") or f"lin:{-gap}:{2 * gap}:31")
    if not xs:
        raise ConfigError("threelayer needs a non-empty x list")
    layers = ThreeLayer(el, ec, er, 0.0, gap).as_multilayer()
    quad = _quad(cfg)
    c = _float(cfg, "c", True)
    results = stress_profile(sorted(xs), layers, c, parse_reg_mode("standard"), quad, _workers(cfg), engine="transfer")
    w = CsvWriter(out, config, ["x", "sigma_xx"])
    failed = False
    for x, o in results:
        if isinstance(o, Converged):
            w.row(x, o.value)
        else:
            failed = True
            w.row(x, math.nan)
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_profile(config: RunConfig, out) -> int:
    cfg = config.values
    profile = parse_profile(cfg["profile"])
    default = "lin:-0.25:0.75:101"
    if isinstance(profile, ExponentialCore):
        default = f"lin:{-0.5 * profile.x_right}:{1.5 * profile.x_right}:101"
    xs = parse_grid(cfg.get("x") or default)
    if not xs:
        raise ConfigError("profile needs a non-empty x list")
    w = CsvWriter(out, config, ["x", "eps"])
    for x in xs:
        w.row(x, epsilon_at(profile, x))
    return EXIT_OK


def cmd_selftest(config: RunConfig, out) -> int:
    cfg = config.values
    suites = [s.strip() for s in cfg.get("suite", "").split(",") if s.strip()] or None
    if suites and any(s not in SUITES for s in suites):
        raise ConfigError(f"unknown suite; choose from {', '.join(SUITES)}")
    try:
        layers = int(cfg["layers"])
    except ValueError as exc:
        raise ConfigError("layers must be an integer") from exc
    if layers < 1:
        raise ConfigError("layers must be positive")
    report = run_selftest(suites, layers)
    out.write(json.dumps(report, indent=2, default=float) + "\n")
    return EXIT_OK if report["passed"] else EXIT_NUMERIC


_HANDLERS = {
    "integrand": cmd_integrand,
    "stress": cmd_stress,
    "force": cmd_force,
    "threelayer": cmd_threelayer,
    "profile": cmd_profile,
    "selftest": cmd_selftest,
}


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parser() -> argparse.ArgumentParser:
    top = _Parser(prog="casimir1d", description="Casimir stress in planar media with graded permittivity.")
    top.add_argument("--version", action="version", version=f"casimir1d {__version__}")
    sub = top.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    run = sub.add_parser("run", help="run a config file using its 'command' key")
    run.add_argument("config_file")
    run.add_argument("--output", default=None, help="output path (overrides the file's output key)")
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"{name} subcommand")
        p.add_argument("--config", help="key = value config file")
        for key, flag, text in _SPECIFIC[name]:
            if key == "slab":
                p.add_argument(flag, dest=key, default=None, nargs=2, metavar=("X1", "X2"), help=text)
            else:
                p.add_argument(flag, dest=key, default=None, help=text)
    return top


def _read_config(path: str) -> dict:
    try:
        return parse_config_text(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
        if args.command is None:
            raise ConfigError(f"missing command; choose one of {', '.join(COMMANDS)} or run")
        if args.command == "run":
            file_values = _read_config(args.config_file)
            command = file_values.get("command")
            if command not in COMMANDS:
                raise ConfigError(f"config needs command = one of {', '.join(COMMANDS)}")
            config = build_config(command, file_values, {"output": args.output})
        else:
            command = args.command
            file_values = _read_config(args.config) if args.config else {}
            if file_values.get("command", command) != command:
                raise ConfigError(f"config is for {file_values['command']!r}, not {command!r}")
            flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
            if flags.get("slab") is not None:
                flags["slab"] = ",".join(flags["slab"])
            config = build_config(command, file_values, flags)
        buffer = io.StringIO()
        code = _HANDLERS[command](config, buffer)
    except ConfigError as exc:
        print(f"casimir1d: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InconclusiveTailError, SingularMatrixError, ArithmeticError) as exc:
        print(f"casimir1d: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    target = config.values.get("output")
    data = buffer.getvalue()
    if target:
        try:
            with open(target, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(data)
        except OSError as exc:
            print(f"casimir1d: error: cannot write {target}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        sys.stdout.write(data)
        sys.stdout.flush()
    if code == EXIT_DIVERGENT:
        print("casimir1d: divergence reported (see output)", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
