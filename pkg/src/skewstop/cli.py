"""Command-line frontend: ``skewstop <command> [flags]``.

Every command writes one table (CSV with ``#`` metadata lines, or JSON) to stdout
or ``--out``.  Exit codes: 0 ok, 2 bad parameters, 3 verification failed,
4 a bracketed search found no root.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__, _roots
from .errors import AssumptionViolation, BracketError, DomainError
from .excessive_ops import OperatorContext
from .payoff import shifted_call
from .sbm_core import SkewParams
from .simulator import WalkConfig, kernels, perturb_stop_set, skew_walk_stop, verify_value
from .stopping_solver import (
    Regime,
    classify,
    critical_rate,
    solve,
    stopping_set,
    value_function,
)

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_VERIFY = 3
EXIT_BRACKET = 4

COMMANDS = ("critical", "critical-curve", "solve", "value-curve", "sweep-beta", "sweep-r", "simulate", "verify")

BOUNDARY_COLUMNS = ["x1_star", "y1_star", "y2_star", "x_star"]

_DEFAULTS = {
    "K": 1.0,
    "dx": 1e-3,
    "paths": 100_000,
    "seed": 0,
    "t_max": None,
    "format": "csv",
    "out": None,
    "workers": 1,
    "scheme": "jump",
    "perturb": 0.0,
    "beta_grid": "0.51:0.99:0.01",
    "r_grid": "0.05:1.5:0.05",
    "x_grid": "-2:3:0.05",
}


@dataclass
class Table:
    columns: list
    rows: list
    meta: dict = field(default_factory=dict)
    flip: Optional[float] = None  # refined regime switch point of a sweep

    def column(self, name):
        return [row[name] for row in self.rows]


# ---------------------------------------------------------------------------
# parsing helpers


def parse_grid(text: str) -> np.ndarray:
    """``a:b:step`` -> a, a+step, ..., up to b inclusive."""
    try:
        a, b, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise DomainError(f"grid must look like start:stop:step, got {text!r}") from None
    if not all(map(math.isfinite, (a, b, step))):
        raise DomainError(f"grid {text!r} has non-finite entries")
    if step <= 0 or b < a:
        raise DomainError(f"grid {text!r} is empty (need step > 0 and stop >= start)")
    n = int(math.floor((b - a) / step + 1e-9)) + 1
    return a + step * np.arange(n)


def parse_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise DomainError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or not all(map(math.isfinite, vals)):
        raise DomainError(f"expected a non-empty list of finite numbers, got {text!r}")
    return vals


def read_config(path: str) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment, dashes in keys become underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if key in out:
                raise DomainError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = val
    return out


# ---------------------------------------------------------------------------
# command implementations (importable)


def _ctx(beta, r, K) -> OperatorContext:
    return OperatorContext(SkewParams(float(beta), float(r)), shifted_call(float(K)))


def _boundary_row(sol) -> dict:
    return {"regime": sol.regime.value, **sol.boundaries()}


def cmd_critical(beta: float, K: float) -> Table:
    cr = critical_rate(beta, K)
    return Table(["beta", "theta_hat", "r_hat"], [{"beta": cr.beta, "theta_hat": cr.theta_hat, "r_hat": cr.r_hat}])


def cmd_critical_curve(K: float, beta_grid: Sequence[float]) -> Table:
    rows = []
    for b in beta_grid:
        cr = critical_rate(float(b), K)
        rows.append({"beta": cr.beta, "theta_hat": cr.theta_hat, "r_hat": cr.r_hat})
    return Table(["beta", "theta_hat", "r_hat"], rows)


def cmd_solve(beta: float, r: float, K: float) -> Table:
    sol = solve(_ctx(beta, r, K))
    return Table(["beta", "r", "K", "regime"] + BOUNDARY_COLUMNS, [{"beta": beta, "r": r, "K": K, **_boundary_row(sol)}])


def cmd_value_curve(beta: float, r: float, K: float, x_grid: Sequence[float]) -> Table:
    ctx = _ctx(beta, r, K)
    sol = solve(ctx)
    V = value_function(sol, ctx)
    xs = np.asarray(x_grid, dtype=float)
    vals = np.atleast_1d(V(xs))
    gs = np.atleast_1d(ctx.g.eval(xs))
    stop = stopping_set(sol)
    rows = [
        {"x": float(x), "g": float(gx), "V": float(v), "stop": int(any(a <= x <= b for a, b in stop))}
        for x, gx, v in zip(xs, gs, vals)
    ]
    return Table(["x", "g", "V", "stop"], rows, meta={"regime": sol.regime.value, **sol.boundaries()})


def _refine_flip(rows, key, f):
    """Bisect ``f`` between the first pair of neighbouring rows whose regime differs."""
    for prev, cur in zip(rows, rows[1:]):
        if prev["regime"] == Regime.TANGENCY.value:
            return prev[key]
        if prev["regime"] != cur["regime"]:
            if cur["regime"] == Regime.TANGENCY.value:
                return cur[key]
            return _roots.bisect(f, prev[key], cur[key], xtol=1e-12, what="regime switch")
    return None


def cmd_sweep_beta(K: float, r: float, beta_grid: Sequence[float]) -> Table:
    rows = []
    for b in beta_grid:
        sol = solve(_ctx(float(b), r, K))
        rows.append({"beta": float(b), **_boundary_row(sol)})
    flip = _refine_flip(rows, "beta", lambda b: critical_rate(b, K).r_hat - r)
    return Table(["beta", "regime"] + BOUNDARY_COLUMNS, rows, meta={"flip_beta": flip}, flip=flip)


def cmd_sweep_r(K: float, beta: float, r_grid: Sequence[float]) -> Table:
    r_hat = critical_rate(beta, K).r_hat
    rows = []
    for r in r_grid:
        sol = solve(_ctx(beta, float(r), K))
        rows.append({"r": float(r), **_boundary_row(sol)})
    flip = _refine_flip(rows, "r", lambda r: r - r_hat)
    return Table(["r", "regime"] + BOUNDARY_COLUMNS, rows, meta={"flip_r": flip, "r_hat": r_hat}, flip=flip)


def _walk_config(opts) -> WalkConfig:
    return WalkConfig(
        dx=float(opts["dx"]),
        seed=int(opts["seed"]),
        n_paths=int(opts["paths"]),
        t_max=None if opts["t_max"] is None else float(opts["t_max"]),
        scheme=str(opts["scheme"]),
        workers=int(opts["workers"]),
    )


def cmd_simulate(beta: float, r: float, K: float, x_list: Sequence[float], cfg: WalkConfig, perturb: float = 0.0) -> Table:
    ctx = _ctx(beta, r, K)
    sol = solve(ctx)
    rule = perturb_stop_set(sol, 1.0 + perturb)
    rows = []
    for x in x_list:
        est = skew_walk_stop(float(x), rule, ctx.p.r, ctx.g, cfg, ctx.p)
        rows.append(
            {
                "x": float(x),
                "mean": est.mean,
                "std_error": est.std_error,
                "n_paths": est.n_paths,
                "truncated_fraction": est.truncated_fraction,
            }
        )
    return Table(["x", "mean", "std_error", "n_paths", "truncated_fraction"], rows, meta={"rule": rule})


def cmd_verify(beta: float, r: float, K: float, x_list: Sequence[float], cfg: WalkConfig, perturb: float = 0.0):
    """Solve, simulate the (optionally perturbed) rule and compare; returns (Table, VerifyReport)."""
    ctx = _ctx(beta, r, K)
    sol = solve(ctx)
    rule = perturb_stop_set(sol, 1.0 + perturb) if perturb else None
    rep = verify_value(sol, ctx, x_list, cfg, stop_set=rule)
    rows = [
        {
            "x": row.x,
            "analytic": row.analytic,
            "mc_mean": row.mc_mean,
            "std_error": row.std_error,
            "z": row.z,
            "truncated_fraction": row.truncated_fraction,
        }
        for row in rep.rows
    ]
    meta = {
        "regime": rep.regime,
        **rep.boundaries,
        "perturb": perturb,
        "bias_allowance": rep.bias_allowance,
        "passed": rep.passed,
        "flagged": rep.flagged,
    }
    return Table(["x", "analytic", "mc_mean", "std_error", "z", "truncated_fraction"], rows, meta=meta), rep


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    now = _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch else _dt.datetime.now(_dt.timezone.utc)
    return now.isoformat(timespec="seconds")


def render(table: Table, command: str, params: dict, fmt: str) -> str:
    meta = {
        "version": __version__,
        "command": command,
        "parameters": params,
        "seed": params.get("seed"),
        "generator": kernels.GENERATOR,
        "timestamp": _timestamp(),
        **table.meta,
    }
    if fmt == "json":
        doc = {"metadata": meta, "columns": table.columns, "rows": table.rows}
        return json.dumps(_jsonable(doc), indent=2, allow_nan=False) + "\n"
    lines = [f"# {k}: {json.dumps(_jsonable(v))}" for k, v in meta.items()]
    lines.append(",".join(table.columns))
    lines += [",".join(_fmt(row.get(c)) for c in table.columns) for row in table.rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="skewstop", description="Optimal stopping of skew Brownian motion.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_, *flags):
        p = sub.add_parser(name, help=help_)
        for flag in flags:
            flag(p)
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--format", choices=["csv", "json"], default=None)
        p.add_argument("--config", default=None, help="flat key=value file; keys may not repeat command-line flags")
        return p

    beta = lambda p: p.add_argument("--beta", type=float, default=None, help="skewness probability")
    r = lambda p: p.add_argument("--r", type=float, default=None, help="discount rate")
    K = lambda p: p.add_argument("--K", type=float, default=None, help="payoff shift (default 1)")
    x = lambda p: p.add_argument("--x", default=None, help="comma-separated start points")
    xg = lambda p: p.add_argument("--x-grid", dest="x_grid", default=None, help="a:b:step")
    bg = lambda p: p.add_argument("--beta-grid", dest="beta_grid", default=None, help="a:b:step")
    rg = lambda p: p.add_argument("--r-grid", dest="r_grid", default=None, help="a:b:step")

    def sim(p):
        p.add_argument("--dx", type=float, default=None)
        p.add_argument("--paths", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--t-max", dest="t_max", type=float, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--scheme", choices=["jump", "step"], default=None)
        p.add_argument("--perturb", type=float, default=None, help="scale finite boundaries by (1 + perturb)")

    add("critical", "critical rate for one beta", beta, K)
    add("critical-curve", "critical rate over a beta grid", K, bg)
    add("solve", "regime and boundaries", beta, r, K)
    add("value-curve", "value function on an x grid", beta, r, K, xg)
    add("sweep-beta", "boundaries over a beta grid", r, K, bg)
    add("sweep-r", "boundaries over an r grid", beta, K, rg)
    add("simulate", "Monte Carlo value of the optimal rule", beta, r, K, x, sim)
    add("verify", "Monte Carlo check of the analytic value", beta, r, K, x, sim)
    return ap


def merge_options(ns: argparse.Namespace) -> dict:
    """Command-line values, then config values, then defaults; a key set twice is an error."""
    given = {k: v for k, v in vars(ns).items() if v is not None and k not in ("command", "config")}
    opts = dict(given)
    if ns.config:
        allowed = {k for k in vars(ns) if k not in ("command", "config")}
        for key, val in read_config(ns.config).items():
            if key not in allowed:
                raise DomainError(f"config key {key!r} is not an option of '{ns.command}'")
            if key in given:
                raise DomainError(f"option {key!r} given both on the command line and in {ns.config}")
            opts[key] = val
    for key in vars(ns):
        if key not in ("command", "config"):
            opts.setdefault(key, _DEFAULTS.get(key))
    return opts


def _need(opts, *keys):
    missing = [k for k in keys if opts.get(k) is None]
    if missing:
        raise DomainError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def run(opts: dict, command: str):
    """Dispatch a merged option dict; returns (table, passed-flag or None)."""
    f = lambda k: float(opts[k])
    if command == "critical":
        _need(opts, "beta")
        return cmd_critical(f("beta"), f("K")), None
    if command == "critical-curve":
        return cmd_critical_curve(f("K"), parse_grid(opts["beta_grid"])), None
    if command == "solve":
        _need(opts, "beta", "r")
        return cmd_solve(f("beta"), f("r"), f("K")), None
    if command == "value-curve":
        _need(opts, "beta", "r")
        return cmd_value_curve(f("beta"), f("r"), f("K"), parse_grid(opts["x_grid"])), None
    if command == "sweep-beta":
        _need(opts, "r")
        return cmd_sweep_beta(f("K"), f("r"), parse_grid(opts["beta_grid"])), None
    if command == "sweep-r":
        _need(opts, "beta")
        return cmd_sweep_r(f("K"), f("beta"), parse_grid(opts["r_grid"])), None
    _need(opts, "beta", "r", "x")
    xs = parse_list(str(opts["x"]))
    cfg = _walk_config(opts)
    if command == "simulate":
        return cmd_simulate(f("beta"), f("r"), f("K"), xs, cfg, f("perturb")), None
    table, rep = cmd_verify(f("beta"), f("r"), f("K"), xs, cfg, f("perturb"))
    return table, rep.passed


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        opts = merge_options(ns)
        table, passed = run(opts, ns.command)
        params = {k: v for k, v in opts.items() if k not in ("out", "format")}
        text = render(table, ns.command, params, str(opts["format"]))
    except BracketError as exc:
        print(f"skewstop: bracket failure: {exc}", file=sys.stderr)
        return EXIT_BRACKET
    except (DomainError, AssumptionViolation, OSError, ValueError) as exc:
        print(f"skewstop: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if opts["out"]:
        with open(opts["out"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if passed is False:
        print("skewstop: verification failed", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
