"""Command-line front end: ``fracpont solve|gradcheck|operators|noether``.

Every command reads one JSON document (``--config``) and writes its
artifacts under ``--out`` (default: the current directory). Exit codes:
0 success, 1 input error, 2 solver non-convergence, 3 threshold or
property failure.

Config keys (all optional except ``problem`` for solve, gradcheck and
noether)::

    problem     tag string, or {"tag": ..., <builder parameters>}; the tag
                "custom" needs "factory": "module:function" returning a
                ControlProblem
    alpha       overrides the problem's order
    interval    [a, b]
    A           initial state (number or list)
    n           number of grid intervals (default 1000)
    u0          constant initial control (number or list, default 0)
    sweep       SweepConfig fields (max_outer, grad_tol, step0, ...)
    noether     {theta1, theta2, theta3, r_max, derivative_scheme,
                 drift_tol, s_values}
    gradcheck   {n, directions, seed, eps, fd_tol, tangent_tol, problems}
    operators   {ns, alphas, continuity_tol}
    outputs     {csv_path, summary_path}; relative paths live under --out
"""

from __future__ import annotations

import argparse
import dataclasses
import importlib
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .diagnostics import LADDER, continuity_in_alpha, gradient_check, operator_ladder
from .ivp import PicardOverflowError
from .noether import (
    SeriesTruncation,
    SymmetryTriple,
    conserved_quantity,
    drift_report,
    invariance_residual,
    torres_frederico_residual,
)
from .ocp import MIN_SWEEP_INTERVALS, ControlProblem, SweepConfig, pontryagin_sweep, write_iterate
from .ops import SampledPath, sup_norm, write_csv
from .problems import PROBLEM_TAGS, build
from .special import NonConvergenceError

__all__ = ["main", "RunConfig", "ConfigError", "load_config", "EXIT_OK", "EXIT_INPUT", "EXIT_NONCONV", "EXIT_THRESHOLD"]

log = logging.getLogger("fracpont")

EXIT_OK, EXIT_INPUT, EXIT_NONCONV, EXIT_THRESHOLD = 0, 1, 2, 3

TOP_KEYS = {"problem", "alpha", "interval", "A", "n", "u0", "sweep", "noether", "gradcheck", "operators", "outputs"}
NOETHER_DEFAULTS = {
    "theta1": 1.0,
    "theta2": 1.0,
    "theta3": -1.0,
    "r_max": 3,
    "derivative_scheme": "finite_difference",
    "drift_tol": 0.05,
    "s_values": [0.25, 0.5, 1.0],
}
GRADCHECK_DEFAULTS = {"n": 2048, "directions": 5, "seed": 0, "eps": 1e-4, "fd_tol": 1e-4, "tangent_tol": 1e-4, "problems": None}
OPERATOR_DEFAULTS = {"ns": list(LADDER), "alphas": [0.8, 0.5, 0.999, 1.0], "continuity_tol": 1e-2}
OUTPUT_DEFAULTS = {"csv_path": "trajectory.csv", "summary_path": "summary.json"}


class ConfigError(ValueError):
    """The configuration document is malformed or inconsistent."""


@dataclass
class RunConfig:
    problem: dict
    n: int = 1000
    alpha: Optional[float] = None
    interval: Optional[tuple] = None
    A: Any = None
    u0: Any = 0.0
    sweep: SweepConfig = field(default_factory=SweepConfig)
    noether: dict = field(default_factory=lambda: dict(NOETHER_DEFAULTS))
    gradcheck: dict = field(default_factory=lambda: dict(GRADCHECK_DEFAULTS))
    operators: dict = field(default_factory=lambda: dict(OPERATOR_DEFAULTS))
    outputs: dict = field(default_factory=lambda: dict(OUTPUT_DEFAULTS))

    def build_problem(self, tag: Optional[str] = None) -> ControlProblem:
        spec = dict(self.problem)
        tag = tag or spec.pop("tag")
        spec.pop("tag", None)
        if tag == "custom":
            factory = spec.pop("factory", None)
            if not factory:
                raise ConfigError('problem "custom" needs "factory": "module:function"')
            prob = build("custom", problem=_load_factory(factory)(**spec))
        else:
            prob = build(tag, **spec)
        if self.alpha is not None:
            prob = prob.with_alpha(self.alpha)
        changes = {}
        if self.interval is not None:
            changes.update(a=float(self.interval[0]), b=float(self.interval[1]))
        if self.A is not None:
            changes["initial"] = self.A
        if changes:
            prob = dataclasses.replace(prob, **changes)
        return prob


def _load_factory(ref: str):
    mod, _, attr = ref.partition(":")
    if not mod or not attr:
        raise ConfigError(f"factory must look like 'module:function', got {ref!r}")
    try:
        return getattr(importlib.import_module(mod), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigError(f"cannot import {ref!r}: {exc}") from None


def _merge(name: str, given, defaults: dict) -> dict:
    if given is None:
        return dict(defaults)
    if not isinstance(given, dict):
        raise ConfigError(f'"{name}" must be an object')
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f'unknown keys in "{name}": {sorted(unknown)}')
    out = dict(defaults)
    out.update(given)
    return out


def _finite(name, value):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f'"{name}" must be a number') from None
    if not math.isfinite(v):
        raise ConfigError(f'"{name}" must be finite')
    return v


def parse_config(doc: dict, need_problem: bool = True) -> RunConfig:
    """Validate a decoded config document."""
    if not isinstance(doc, dict):
        raise ConfigError("the config must be a JSON object")
    unknown = set(doc) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    prob = doc.get("problem")
    if prob is None:
        if need_problem:
            raise ConfigError('missing "problem"')
        prob = {"tag": "classical_lq"}
    if isinstance(prob, str):
        prob = {"tag": prob}
    if not isinstance(prob, dict) or prob.get("tag") not in PROBLEM_TAGS:
        raise ConfigError(f'"problem" needs a tag in {PROBLEM_TAGS}')
    n = doc.get("n", 1000)
    if isinstance(n, bool) or not isinstance(n, int):
        raise ConfigError('"n" must be an integer')
    if n < MIN_SWEEP_INTERVALS:
        raise ConfigError(f'"n" must be at least {MIN_SWEEP_INTERVALS}, got {n}')
    alpha = doc.get("alpha")
    alpha = None if alpha is None else _finite("alpha", alpha)
    interval = doc.get("interval")
    if interval is not None:
        if not isinstance(interval, list) or len(interval) != 2:
            raise ConfigError('"interval" must be [a, b]')
        interval = (_finite("interval[0]", interval[0]), _finite("interval[1]", interval[1]))
        if not interval[0] < interval[1]:
            raise ConfigError('"interval" needs a < b')
    sweep = doc.get("sweep") or {}
    if not isinstance(sweep, dict):
        raise ConfigError('"sweep" must be an object')
    names = {f.name for f in dataclasses.fields(SweepConfig)}
    if set(sweep) - names:
        raise ConfigError(f'unknown keys in "sweep": {sorted(set(sweep) - names)}')
    try:
        sweep_cfg = SweepConfig(**sweep)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f'bad "sweep": {exc}') from None
    noether = _merge("noether", doc.get("noether"), NOETHER_DEFAULTS)
    for key in ("theta1", "theta2", "theta3", "drift_tol"):
        noether[key] = _finite(f"noether.{key}", noether[key])
    try:
        SeriesTruncation(noether["r_max"], noether["derivative_scheme"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f'bad "noether": {exc}') from None
    return RunConfig(
        problem=prob,
        n=n,
        alpha=alpha,
        interval=interval,
        A=doc.get("A"),
        u0=doc.get("u0", 0.0),
        sweep=sweep_cfg,
        noether=noether,
        gradcheck=_merge("gradcheck", doc.get("gradcheck"), GRADCHECK_DEFAULTS),
        operators=_merge("operators", doc.get("operators"), OPERATOR_DEFAULTS),
        outputs=_merge("outputs", doc.get("outputs"), OUTPUT_DEFAULTS),
    )


def load_config(path, need_problem: bool = True) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(doc, need_problem)


# -- output helpers -----------------------------------------------------------------


class _Out:
    def __init__(self, root: Path, quiet: bool):
        self.root = root
        self.quiet = quiet

    def path(self, rel) -> Path:
        p = Path(rel)
        p = p if p.is_absolute() else self.root / p
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def json(self, rel, obj) -> None:
        with open(self.path(rel), "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")

    def say(self, line: str = "") -> None:
        if not self.quiet:
            print(line)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def _solve(cfg: RunConfig, prob: ControlProblem):
    grid = prob.grid(cfg.n)
    u0 = np.broadcast_to(np.atleast_1d(np.asarray(cfg.u0, dtype=float)), (prob.m,))
    return pontryagin_sweep(prob, SampledPath.constant(grid, u0), grid, cfg.sweep)


# -- commands ----------------------------------------------------------------------


def cmd_solve(cfg: RunConfig, out: _Out) -> int:
    prob = cfg.build_problem()
    it = _solve(cfg, prob)
    write_iterate(it, out.path(cfg.outputs["csv_path"]), out.path(cfg.outputs["summary_path"]))
    out.say(f"{prob.name}: cost {it.cost:.12g}, stationarity {it.stationarity:.3e}, "
            f"{it.iteration} iterations, {it.message}")
    return EXIT_OK if it.converged else EXIT_NONCONV


def cmd_gradcheck(cfg: RunConfig, out: _Out) -> int:
    gc = cfg.gradcheck
    tags = gc["problems"] or [cfg.problem["tag"]]
    rows = []
    for tag in tags:
        if tag not in PROBLEM_TAGS:
            raise ConfigError(f"unknown problem tag {tag!r}")
        prob = cfg.build_problem(tag if tag != cfg.problem["tag"] else None)
        rows += gradient_check(prob, int(gc["n"]), int(gc["directions"]), int(gc["seed"]), float(gc["eps"]))
    ok = True
    out.say(f"{'problem':22s} {'dir':>3s} {'pairing':>14s} {'central fd':>14s} {'fd err':>9s} {'tangent err':>11s}")
    for r in rows:
        r["fd_pass"] = r["fd_error"] <= gc["fd_tol"]
        r["tangent_pass"] = r["tangent_error"] <= gc["tangent_tol"]
        ok = ok and r["fd_pass"] and r["tangent_pass"]
        out.say(f"{r['problem']:22s} {r['direction']:3d} {r['pairing']:14.6e} {r['central_fd']:14.6e} "
                f"{r['fd_error']:9.2e} {r['tangent_error']:11.2e}")
    out.json("gradcheck.json", {"rows": rows, "fd_tol": gc["fd_tol"], "tangent_tol": gc["tangent_tol"], "passed": ok})
    out.say("all checks passed" if ok else "some checks failed")
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_operators(cfg: RunConfig, out: _Out) -> int:
    op = cfg.operators
    rows = operator_ladder(tuple(op["alphas"]), tuple(int(n) for n in op["ns"]))
    cont = continuity_in_alpha(tol=float(op["continuity_tol"]))
    ns = rows[0]["n"] if rows else []
    out.say(f"{'identity':32s} {'alpha':>6s} " + " ".join(f"{n:>10d}" for n in ns) + "   order  verdict")
    for r in rows:
        order = "   -  " if r["order"] is None else f"{r['order']:6.2f}"
        errs = " ".join(f"{e:10.3e}" for e in r["errors"])
        out.say(f"{r['identity']:32s} {r['alpha']:6.3g} {errs} {order}  {'pass' if r['passed'] else 'FAIL'}")
    out.say(f"alpha {cont['near']} vs 1: integral {cont['integral']:.3e}, derivative {cont['derivative']:.3e} "
            f"({'pass' if cont['passed'] else 'FAIL'})")
    ok = all(r["passed"] for r in rows) and cont["passed"]
    out.json("operators.json", {"rows": rows, "continuity": cont, "passed": ok})
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_noether(cfg: RunConfig, out: _Out) -> int:
    prob = cfg.build_problem()
    nc = cfg.noether
    triple = SymmetryTriple.rotations(nc["theta1"], nc["theta2"], nc["theta3"])
    triple.check_dims(prob)
    for grp in (triple.phi1, triple.phi2, triple.phi3):
        grp.check()
    it = _solve(cfg, prob)
    write_iterate(it, out.path(cfg.outputs["csv_path"]), out.path(cfg.outputs["summary_path"]))
    if not it.converged:
        out.say(f"sweep did not converge ({it.message}); stationarity {it.stationarity:.3e}")
        return EXIT_NONCONV
    inv = invariance_residual(prob, triple, it, nc["s_values"])
    g = it.q.with_values(triple.phi1.generator(it.q.values))
    tf = torres_frederico_residual(g, it.p, prob.alpha)
    series = conserved_quantity(g, it.p, prob.alpha, SeriesTruncation(nc["r_max"], nc["derivative_scheme"]))
    report = drift_report(series)
    write_csv(out.path("series.csv"), series)
    write_csv(out.path("torres_frederico.csv"), tf)
    passed = report["rel_drift"] <= nc["drift_tol"]
    report.update(
        invariance_residual=inv,
        torres_frederico_sup=sup_norm(tf),
        drift_tol=nc["drift_tol"],
        r_max=nc["r_max"],
        passed=passed,
    )
    out.json("drift_report.json", report)
    out.say(f"invariance residual {inv:.3e}, Torres-Frederico sup {sup_norm(tf):.3e}")
    out.say(f"series spread {report['spread']:.3e}, rel_drift {report['rel_drift']:.3e} "
            f"(tol {nc['drift_tol']:g}), last term {report['last_term_magnitude']:.3e}")
    return EXIT_OK if passed else EXIT_THRESHOLD


COMMANDS = {"solve": cmd_solve, "gradcheck": cmd_gradcheck, "operators": cmd_operators, "noether": cmd_noether}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracpont", description="Fractional optimal control toolkit.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON config file")
    ap.add_argument("--out", default=".", help="directory for artifacts (default: .)")
    ap.add_argument("--quiet", action="store_true", help="suppress the printed tables")
    return ap


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    out = _Out(Path(args.out), args.quiet)
    try:
        cfg = load_config(args.config, need_problem=args.command != "operators")
        return COMMANDS[args.command](cfg, out)
    except (NonConvergenceError, PicardOverflowError) as exc:
        print(f"fracpont: solver failed: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except (ValueError, TypeError, KeyError, OSError) as exc:
        print(f"fracpont: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
