"""Command-line entry point: one experiment per invocation.

Every experiment produces one or more tables. Tables are written as CSV or
JSON (``--format svg`` writes the CSV plus a figure), and a JSON summary of
the run goes to standard output.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from stepcoin import __version__
from stepcoin.config import RunSpec, UsageError, parse_angle, parse_config
from stepcoin.entropy import entropy_series
from stepcoin.errors import ResourceBudgetError, StepcoinError
from stepcoin.localization import analytic_lloc_curve, lloc_sweep, sec2_average
from stepcoin.observables import (
    probability_field,
    return_probability,
    shannon_position,
    support_count,
)
from stepcoin.walk import CoinParams, evolve, max_sites, trajectory

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3

PROBABILITY_COLUMNS = ("walk", "t", "m", "n", "p")
SERIES_COLUMNS = ("walk", "t", "value")
SWEEP_COLUMNS = ("omega", "lambda", "l_loc", "divergent")

CATEGORY_J = range(1, 11)


@dataclass
class Table:
    name: str
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)


@dataclass
class Outcome:
    tables: list[Table]
    results: dict
    plots: list = field(default_factory=list)  # (file name, callable(path))


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _json_value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def render(table: Table, fmt: str) -> str:
    if fmt == "json":
        doc = {
            "columns": list(table.columns),
            "rows": [[_json_value(v) for v in row] for row in table.rows],
        }
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _walks(spec: RunSpec):
    return [(m.value, spec.params.with_mode(m)) for m in spec.modes]


def _check_budget(spec: RunSpec):
    if max_sites(spec.steps) > spec.site_budget:
        raise ResourceBudgetError(
            f"{spec.steps} steps can reach {max_sites(spec.steps)} sites, budget is {spec.site_budget}"
        )


def _probability_rows(label, psi):
    field_ = probability_field(psi)
    return [(label, psi.step, int(m), int(n), float(p)) for (m, n), p in zip(field_.sites, field_.values)]


def _exp_probability(spec: RunSpec) -> Outcome:
    table = Table("probability", PROBABILITY_COLUMNS)
    panels = []
    results = {}
    for label, params in _walks(spec):
        psi = evolve(spec.init, params, spec.steps, snapshot_only=True, site_budget=spec.site_budget)[0]
        table.rows += _probability_rows(label, psi)
        f = probability_field(psi)
        panels.append((f"{label}, t = {spec.steps}", f.sites, f.values))
        results[label] = {
            "support": support_count(f, spec.support_threshold),
            "max_p": float(f.values.max()),
            "total": f.total(),
        }
    from stepcoin import plotting

    plot = ("probability.svg", lambda path: plotting.lattice_panels(path, panels))
    return Outcome([table], results, [plot])


def _position_series(spec: RunSpec, quantity: str) -> Outcome:
    table = Table(quantity.replace("-", "_"), SERIES_COLUMNS)
    curves = {}
    results = {}
    _check_budget(spec)
    for label, params in _walks(spec):
        ts, vals = [], []
        for psi in trajectory(spec.init, params, spec.steps):
            f = probability_field(psi)
            if quantity == "support":
                v = support_count(f, spec.support_threshold)
            else:
                v = return_probability(f, spec.init.origin)
            ts.append(psi.step)
            vals.append(v)
            table.rows.append((label, psi.step, v))
        curves[label] = (ts, vals)
        if quantity == "support":
            results[label] = {"max": int(max(vals)), "final": int(vals[-1]),
                              "single_site_steps": [t for t, v in zip(ts, vals) if v == 1]}
        else:
            results[label] = {"max_after_start": float(max(vals[1:], default=0.0)),
                              "full_return_steps": [t for t, v in zip(ts, vals) if t > 0 and abs(v - 1.0) <= 1e-9]}
    from stepcoin import plotting

    ylabel = "support count" if quantity == "support" else "$P_{0,0}(t)$"
    plot = (f"{table.name}.svg", lambda path: plotting.series_plot(path, curves, ylabel))
    return Outcome([table], results, [plot])


_ENTROPY_QUANTITIES = {
    "shannon": ("shannon_position", "shannon_coin"),
    "entanglement": ("entanglement",),
    "qre": ("qre_d", "qre_v"),
}

_YLABELS = {
    "shannon_position": "$S_P$",
    "shannon_coin": "$S_C$",
    "entanglement": "$E(t)$",
    "qre_d": r"$D(\rho||\sigma)$",
    "qre_v": r"$V(\rho||\sigma)$",
}


def _exp_entropy(spec: RunSpec) -> Outcome:
    if spec.experiment == "qre" and len(spec.modes) != 2:
        raise UsageError("qre compares the two walks; use --mode both")
    if spec.steps < 1:
        raise UsageError(f"{spec.experiment} needs --steps >= 1")
    _check_budget(spec)
    es = entropy_series(spec.params, spec.init, spec.steps, zero_tol=spec.zero_tol)
    wanted = {m.value for m in spec.modes} | {"sdc||sic"}
    tables, plots, results = [], [], {}
    from stepcoin import plotting

    for q in _ENTROPY_QUANTITIES[spec.experiment]:
        table = Table(q, SERIES_COLUMNS)
        curves = {}
        for (quantity, walk), s in es.series.items():
            if quantity != q or walk not in wanted:
                continue
            table.rows += [(walk, t, v) for t, v in s.points]
            curves[walk] = (s.steps, s.values)
            finite = s.values[np.isfinite(s.values)]
            results[f"{q}:{walk}"] = {
                "min": float(finite.min()) if len(finite) else None,
                "max": float(finite.max()) if len(finite) else None,
                "nonfinite_steps": [int(t) for t, v in zip(s.steps, s.values) if not np.isfinite(v)],
            }
        tables.append(table)
        plots.append((f"{q}.svg", lambda path, c=curves, y=_YLABELS[q]: plotting.series_plot(path, c, y)))
    if spec.experiment == "qre":
        results["zero_variance_steps"] = es.zero_variance_steps
    return Outcome(tables, results, plots)


def _peaks(omegas, l_loc):
    y = np.where(np.isfinite(l_loc), l_loc, -np.inf)
    out = {}
    for side, mask in (("negative", omegas < 0), ("positive", omegas > 0)):
        if mask.any():
            i = int(np.argmax(np.where(mask, y, -np.inf)))
            out[side] = {"omega": float(omegas[i]), "l_loc": float(l_loc[i])}
    return out


def _exp_lyapunov(spec: RunSpec) -> Outcome:
    omegas = spec.omega.points()
    tables, curves, results = [], {}, {}
    for label, params in _walks(spec):
        res = lloc_sweep(params, omegas, spec.steps, spec.estimator, spec.pole_tol)
        table = Table(f"lyapunov_sweep_{label}", SWEEP_COLUMNS)
        table.rows = [(float(r.omega), r.lyapunov, r.l_loc, r.divergent) for r in res]
        tables.append(table)
        l_loc = np.array([r.l_loc for r in res])
        curves[label] = (omegas, l_loc)
        results[label] = {
            "divergent": bool(any(r.divergent for r in res)),
            "pole_step": next((r.pole_step for r in res if r.pole_step is not None), None),
            "peaks": _peaks(omegas, l_loc),
        }
    from stepcoin import plotting

    plot = ("lyapunov_sweep.svg", lambda path: plotting.sweep_plot(path, curves))
    return Outcome(tables, results, [plot])


def _exp_analytic(spec: RunSpec) -> Outcome:
    omegas = spec.omega.points()
    raw, norm = analytic_lloc_curve(spec.params, omegas, spec.n_max)
    table = Table("analytic_lloc", SWEEP_COLUMNS + ("l_loc_normalized",))
    for w, r, nv in zip(omegas, raw, norm):
        lam = math.inf if r == 0 else 1.0 / r
        table.rows.append((float(w), lam, float(r), bool(r == 0), float(nv)))
    results = {
        "sec2_average": [sec2_average(spec.params.theta1, spec.n_max), sec2_average(spec.params.theta2, spec.n_max)],
        "peaks": _peaks(omegas, raw),
    }
    from stepcoin import plotting

    curves = {"analytic": (omegas, norm)}
    plot = ("analytic_lloc.svg",
            lambda path: plotting.sweep_plot(path, curves, ylabel="normalized $L_{loc}$", log=False))
    return Outcome([table], results, [plot])


def category_angle(j: int):
    return parse_angle(f"pi/3*(1+{j}/10)")


def _exp_categories(spec: RunSpec) -> Outcome:
    summary = Table("categories_summary", ("j", "theta", "walk", "support", "max_p", "shannon_position", "return_p"))
    tables, plots, results = [], [], {}
    from stepcoin import plotting

    for j in CATEGORY_J:
        angle = category_angle(j)
        theta = float(angle)
        base = CoinParams(theta, theta, spec.params.phi)
        table = Table(f"categories_j{j:02d}", PROBABILITY_COLUMNS)
        panels = []
        for m in spec.modes:
            psi = evolve(spec.init, base.with_mode(m), spec.steps, snapshot_only=True,
                         site_budget=spec.site_budget)[0]
            table.rows += _probability_rows(m.value, psi)
            f = probability_field(psi)
            panels.append((f"{m.value}, j = {j}", f.sites, f.values))
            row = (j, theta, m.value, support_count(f, spec.support_threshold), float(f.values.max()),
                   shannon_position(f), return_probability(f, spec.init.origin))
            summary.rows.append(row)
            results[f"j{j:02d}:{m.value}"] = dict(zip(summary.columns[3:], row[3:]))
        tables.append(table)
        plots.append((f"{table.name}.svg", lambda path, p=panels: plotting.lattice_panels(path, p)))
    tables.append(summary)
    return Outcome(tables, results, plots)


EXPERIMENT_RUNNERS = {
    "probability": _exp_probability,
    "support": lambda s: _position_series(s, "support"),
    "return-prob": lambda s: _position_series(s, "return-prob"),
    "shannon": _exp_entropy,
    "entanglement": _exp_entropy,
    "qre": _exp_entropy,
    "lyapunov-sweep": _exp_lyapunov,
    "analytic-lloc": _exp_analytic,
    "categories": _exp_categories,
}


def _frac(f: Fraction):
    return f.numerator if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def summary_header(spec: RunSpec) -> dict:
    grid = None
    if spec.omega is not None:
        pts = spec.omega.points()
        grid = {"min": spec.omega.lo, "max": spec.omega.hi, "step": spec.omega.step, "points": int(len(pts))}
    return {
        "experiment": spec.experiment,
        "version": __version__,
        "params": {
            "theta1": spec.params.theta1,
            "theta2": spec.params.theta2,
            "phi": spec.params.phi,
            "expressions": dict(spec.angle_text),
        },
        "modes": [m.value for m in spec.modes],
        "init": {
            "spinor": [[float(z.real), float(z.imag)] for z in spec.init.spinor],
            "origin": list(spec.init.origin),
        },
        "steps": spec.steps,
        "omega_grid": grid,
        "tolerances": {
            "support_threshold": spec.support_threshold,
            "pole_tol": spec.pole_tol,
            "zero_tol": spec.zero_tol,
        },
        "estimator": spec.estimator,
        "n_max": spec.n_max,
        "format": spec.fmt,
    }


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return _json_value(obj)


def run(spec: RunSpec) -> dict:
    """Run one experiment, write its files into ``spec.out`` and return the summary dict."""
    start = time.perf_counter()
    outcome = EXPERIMENT_RUNNERS[spec.experiment](spec)
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    ext = "json" if spec.fmt == "json" else "csv"
    for table in outcome.tables:
        path = out / f"{table.name}.{ext}"
        path.write_text(render(table, spec.fmt))
        written.append(str(path))
    if spec.fmt == "svg":
        for name, draw in outcome.plots:
            path = out / name
            draw(path)
            written.append(str(path))
    summary = summary_header(spec)
    summary["outputs"] = written
    summary["results"] = _clean(outcome.results)
    summary["wall_time_s"] = time.perf_counter() - start
    return summary


def main(argv=None) -> int:
    try:
        spec = parse_config(argv)
        summary = run(spec)
    except UsageError as exc:
        print(f"stepcoin: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"stepcoin: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (StepcoinError, ArithmeticError, ValueError) as exc:
        print(f"stepcoin: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    json.dump(summary, sys.stdout, indent=2, allow_nan=False)
    sys.stdout.write("\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
