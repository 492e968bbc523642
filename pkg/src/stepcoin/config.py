"""Run configuration: angle expressions, config files and command-line flags."""

from __future__ import annotations

import argparse
import ast
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from stepcoin.errors import StepcoinError, ValidationError
from stepcoin.localization import ESTIMATORS, POLE_TOL, omega_grid
from stepcoin.observables import DEFAULT_SUPPORT_THRESHOLD
from stepcoin.spectral import ZERO_TOL
from stepcoin.walk import DEFAULT_SITE_BUDGET, CoinParams, InitialState, Mode

__all__ = [
    "EXPERIMENTS",
    "SWEEPS",
    "FORMATS",
    "UsageError",
    "Angle",
    "parse_angle",
    "OmegaGridSpec",
    "RunSpec",
    "build_parser",
    "read_config_file",
    "parse_config",
]

EXPERIMENTS = (
    "probability",
    "support",
    "return-prob",
    "shannon",
    "entanglement",
    "qre",
    "lyapunov-sweep",
    "analytic-lloc",
    "categories",
)
SWEEPS = ("lyapunov-sweep", "analytic-lloc")
FORMATS = ("csv", "json", "svg")


class UsageError(StepcoinError):
    """Bad command line or config file (exit code 1)."""


@dataclass(frozen=True)
class Angle:
    """An angle ``rational + pi_coeff * pi`` kept exact until converted."""

    rational: Fraction
    pi_coeff: Fraction
    text: str = ""

    def __float__(self):
        return float(self.rational) + float(self.pi_coeff) * math.pi


def _lin(node) -> tuple[Fraction, Fraction]:
    if isinstance(node, ast.Expression):
        return _lin(node.body)
    if isinstance(node, ast.Constant) and type(node.value) in (int, float):
        return Fraction(str(node.value)), Fraction(0)
    if isinstance(node, ast.Name) and node.id in ("pi", "π"):
        return Fraction(0), Fraction(1)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        a, b = _lin(node.operand)
        return (-a, -b) if isinstance(node.op, ast.USub) else (a, b)
    if isinstance(node, ast.BinOp):
        la, lb = _lin(node.left)
        ra, rb = _lin(node.right)
        if isinstance(node.op, ast.Add):
            return la + ra, lb + rb
        if isinstance(node.op, ast.Sub):
            return la - ra, lb - rb
        if isinstance(node.op, ast.Mult):
            if lb and rb:
                raise ValueError("pi*pi is not an angle")
            return la * ra, la * rb + lb * ra
        if isinstance(node.op, ast.Div):
            if rb or ra == 0:
                raise ValueError("can only divide by a nonzero rational")
            return la / ra, lb / ra
    raise ValueError(f"unsupported syntax {ast.dump(node)}")


def parse_angle(text: str) -> Angle:
    """Parse ``pi/7``, ``-pi/2``, ``pi/3*(1+3/10)``, ``0.25`` exactly.

    Raises UsageError for anything that is not a rational combination of 1
    and pi.
    """
    src = str(text).strip()
    try:
        a, b = _lin(ast.parse(src, mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"malformed angle expression {text!r}: {exc}") from None
    return Angle(a, b, src)


def parse_spinor(text: str) -> np.ndarray:
    """Comma-separated complex components (``i`` or ``j`` suffix), normalized on return."""
    parts = [p.strip().replace("i", "j") for p in str(text).split(",")]
    try:
        v = np.array([complex(p) for p in parts])
    except ValueError:
        raise UsageError(f"malformed spinor {text!r}") from None
    if v.shape != (4,) or not np.linalg.norm(v) > 0:
        raise UsageError(f"spinor needs 4 components, not all zero: {text!r}")
    return v / np.linalg.norm(v)


def parse_site(text: str) -> tuple[int, int]:
    try:
        m, n = (int(p) for p in str(text).split(","))
    except ValueError:
        raise UsageError(f"malformed lattice site {text!r}, expected 'm,n'") from None
    return m, n


@dataclass(frozen=True)
class OmegaGridSpec:
    lo: float
    hi: float
    step: float

    def points(self) -> np.ndarray:
        try:
            return omega_grid(self.lo, self.hi, self.step)
        except ValidationError as exc:
            raise UsageError(str(exc)) from None


@dataclass
class RunSpec:
    experiment: str
    params: CoinParams
    modes: tuple[Mode, ...]
    init: InitialState = field(default_factory=InitialState)
    steps: int = 100
    omega: OmegaGridSpec | None = None
    fmt: str = "csv"
    out: Path = Path("results")
    support_threshold: float = DEFAULT_SUPPORT_THRESHOLD
    pole_tol: float = POLE_TOL
    zero_tol: float = ZERO_TOL
    estimator: str = "envelope"
    n_max: int = 10_000
    site_budget: int = DEFAULT_SITE_BUDGET
    angle_text: dict[str, str] = field(default_factory=dict)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# flag dest -> config-file key
_KEYS = {
    "experiment": "experiment",
    "theta": "theta",
    "theta1": "theta1",
    "theta2": "theta2",
    "phi": "phi",
    "mode": "mode",
    "steps": "steps",
    "omega_min": "omega-min",
    "omega_max": "omega-max",
    "omega_step": "omega-step",
    "threshold": "threshold",
    "pole_tol": "pole-tol",
    "zero_tol": "zero-tol",
    "estimator": "estimator",
    "n_max": "n-max",
    "spinor": "spinor",
    "origin": "origin",
    "site_budget": "site-budget",
    "out": "out",
    "format": "format",
}

_DEFAULTS = {
    "theta": "pi/4",
    "phi": "0",
    "mode": "both",
    "steps": "100",
    "threshold": repr(DEFAULT_SUPPORT_THRESHOLD),
    "pole_tol": repr(POLE_TOL),
    "zero_tol": repr(ZERO_TOL),
    "estimator": "envelope",
    "n_max": "10000",
    "origin": "0,0",
    "site_budget": str(DEFAULT_SITE_BUDGET),
    "out": "results",
    "format": "csv",
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="stepcoin",
        description="2D quantum walk with a step-dependent coin: run one experiment and write its data.",
    )
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="flat 'key = value' file; flags override it")
    p.add_argument("--theta", help="sets theta1 = theta2, e.g. pi/4 or 'pi/3*(1+3/10)'")
    p.add_argument("--theta1")
    p.add_argument("--theta2")
    p.add_argument("--phi")
    p.add_argument("--mode", choices=("sdc", "sic", "both"))
    p.add_argument("--steps")
    p.add_argument("--omega-min", dest="omega_min")
    p.add_argument("--omega-max", dest="omega_max")
    p.add_argument("--omega-step", dest="omega_step")
    p.add_argument("--threshold", help="support-count probability threshold")
    p.add_argument("--pole-tol", dest="pole_tol")
    p.add_argument("--zero-tol", dest="zero_tol")
    p.add_argument("--estimator", choices=ESTIMATORS)
    p.add_argument("--n-max", dest="n_max", help="terms in the sec^2 average")
    p.add_argument("--spinor", help="initial coin state, e.g. '1,1i,0,0' (normalized for you)")
    p.add_argument("--origin", help="initial site 'm,n'")
    p.add_argument("--site-budget", dest="site_budget")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=FORMATS)
    return p


def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment. Keys are flag names without the leading dashes."""
    by_key = {v: k for k, v in _KEYS.items()}
    out = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("_", "-")
        if key not in by_key:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[by_key[key]] = value
    return out


def _resolve_theta(layer: dict[str, str], where: str) -> dict[str, str]:
    layer = dict(layer)
    if "theta" in layer:
        if "theta1" in layer or "theta2" in layer:
            raise UsageError(f"conflicting {where}: theta together with theta1/theta2")
        layer["theta1"] = layer["theta2"] = layer.pop("theta")
    return layer


def _as(kind, value, name):
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise UsageError(f"invalid value for {name}: {value!r}") from None


def parse_config(argv=None) -> RunSpec:
    """Merge defaults, the optional config file and command-line flags (flags win)."""
    ns = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(ns).items() if v is not None and k != "config"}
    config = read_config_file(ns.config) if ns.config else {}
    merged = _resolve_theta(_DEFAULTS, "defaults")
    merged.update(_resolve_theta(config, "config keys"))
    merged.update(_resolve_theta(flags, "flags"))

    experiment = merged.get("experiment")
    if experiment is None:
        raise UsageError("no experiment given (use --experiment)")
    if experiment not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {experiment!r}")

    angles = {k: parse_angle(merged[k]) for k in ("theta1", "theta2", "phi")}
    params = CoinParams(float(angles["theta1"]), float(angles["theta2"]), float(angles["phi"]))
    mode = merged["mode"]
    if mode not in ("sdc", "sic", "both"):
        raise UsageError(f"unknown mode {mode!r}")
    modes = (Mode.SDC, Mode.SIC) if mode == "both" else (Mode(mode),)

    steps = _as(int, merged["steps"], "steps")
    if steps < 0:
        raise UsageError("steps must be >= 0")

    grid_keys = [k for k in ("omega_min", "omega_max", "omega_step") if k in merged]
    omega = None
    if experiment in SWEEPS:
        if len(grid_keys) != 3:
            raise UsageError(f"{experiment} needs --omega-min, --omega-max and --omega-step")
        lo, hi, st = (float(parse_angle(merged[k])) for k in ("omega_min", "omega_max", "omega_step"))
        omega = OmegaGridSpec(lo, hi, st)
        omega.points()
    elif grid_keys:
        raise UsageError(f"omega grid flags only apply to {', '.join(SWEEPS)}")

    fmt = merged["format"]
    if fmt not in FORMATS:
        raise UsageError(f"unknown format {fmt!r}")
    estimator = merged["estimator"]
    if estimator not in ESTIMATORS:
        raise UsageError(f"unknown estimator {estimator!r}")

    spinor = parse_spinor(merged["spinor"]) if "spinor" in merged else None
    try:
        init = InitialState(origin=parse_site(merged["origin"])) if spinor is None else InitialState(
            spinor, parse_site(merged["origin"])
        )
    except ValidationError as exc:
        raise UsageError(str(exc)) from None

    return RunSpec(
        experiment=experiment,
        params=params,
        modes=modes,
        init=init,
        steps=steps,
        omega=omega,
        fmt=fmt,
        out=Path(merged["out"]),
        support_threshold=_as(float, merged["threshold"], "threshold"),
        pole_tol=_as(float, merged["pole_tol"], "pole-tol"),
        zero_tol=_as(float, merged["zero_tol"], "zero-tol"),
        estimator=estimator,
        n_max=_as(int, merged["n_max"], "n-max"),
        site_budget=_as(int, merged["site_budget"], "site-budget"),
        angle_text={k: a.text for k, a in angles.items()},
    )
