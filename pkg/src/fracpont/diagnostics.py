"""Refinement studies for the discrete operators and gradient checks.

Both suites return plain rows (dicts) so the CLI can print them and the
tests can assert on them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from .ocp import ControlProblem, cost, directional_derivative, gateaux_gradient, state_solve
from .ops import (
    Grid,
    SampledPath,
    caputo_left_derivative,
    inner_product,
    left_frac_integral,
    right_frac_integral,
    sup_norm,
)

__all__ = [
    "LADDER",
    "CANONICAL_ALPHA",
    "OperatorCheck",
    "operator_checks",
    "operator_ladder",
    "ladder_verdict",
    "continuity_in_alpha",
    "smooth_direction",
    "gradient_check",
]

LADDER = (512, 1024, 2048, 4096)
# nodes next to t = a skipped by the composition checks
SKIP = 2


@dataclass(frozen=True)
class OperatorCheck:
    """One identity, its error functional on a grid and its threshold at the finest grid."""

    name: str
    error: Callable[[Grid], float]
    threshold: float


def _semigroup(a1: float, a2: float):
    def err(grid):
        g = SampledPath.from_function(grid, lambda t: 1.0 + t**2)
        lhs = left_frac_integral(left_frac_integral(g, a2), a1)
        rhs = left_frac_integral(g, a1 + a2)
        return sup_norm(lhs.values - rhs.values) / sup_norm(rhs)

    return err


def _ibp(alpha: float):
    def err(grid):
        g1 = SampledPath.from_function(grid, lambda t: np.cos(3.0 * t))
        g2 = SampledPath.from_function(grid, np.exp)
        lhs = inner_product(left_frac_integral(g1, alpha), g2)
        rhs = inner_product(g1, right_frac_integral(g2, alpha))
        return abs(lhs - rhs) / (sup_norm(g1) * sup_norm(g2) * (grid.b - grid.a))

    return err


def _compose_di(alpha: float):
    # cD(I g) = g; g(a) = 0 keeps I g continuously differentiable
    def err(grid):
        g = SampledPath.from_function(grid, np.sin)
        back = caputo_left_derivative(left_frac_integral(g, alpha), alpha)
        return sup_norm((back.values - g.values)[SKIP:]) / sup_norm(g)

    return err


def _compose_id(alpha: float):
    # I(cD g) = g - g(a)
    def err(grid):
        g = SampledPath.from_function(grid, np.sin)
        back = left_frac_integral(caputo_left_derivative(g, alpha), alpha)
        return sup_norm((back.values - (g.values - g.values[0]))[SKIP:]) / sup_norm(g)

    return err


def operator_checks(alpha: float) -> List[OperatorCheck]:
    """The operator identities at order ``alpha`` on ``[0, 1]``.

    The semigroup row composes two integrals of order ``alpha / 2`` (so
    ``0.4`` twice in the canonical case), except at ``alpha = 1`` where it is
    the classical ``I^1 I^1 = I^2``.
    """
    half = 1.0 if alpha == 1.0 else alpha / 2.0
    return [
        OperatorCheck(f"semigroup I^{half:g} I^{half:g}", _semigroup(half, half), 1e-3),
        OperatorCheck(f"integration by parts a={alpha:g}", _ibp(alpha), 1e-6),
        OperatorCheck(f"cD I = id a={alpha:g}", _compose_di(alpha), 1e-2),
        OperatorCheck(f"I cD = id - g(a) a={alpha:g}", _compose_id(alpha), 1e-2),
    ]


CANONICAL_ALPHA = 0.8


def operator_ladder(alphas: Sequence[float] = (0.8, 0.5, 0.999, 1.0), ns: Sequence[int] = LADDER) -> List[dict]:
    """Error of every identity on every grid of the ladder.

    Thresholds bind at the canonical order 0.8 only. Order-1 rows must also
    show second-order convergence; other rows only need monotone ladders.
    """
    rows = []
    for alpha in alphas:
        for chk in operator_checks(alpha):
            errors = [chk.error(Grid(0.0, 1.0, n)) for n in ns]
            threshold = chk.threshold if alpha == CANONICAL_ALPHA else None
            min_order = 1.8 if alpha == 1.0 else None
            rows.append(ladder_verdict(chk.name, alpha, ns, errors, threshold, min_order=min_order))
    return rows


def ladder_verdict(
    name: str,
    alpha: float,
    ns,
    errors,
    threshold: float | None,
    slack: float = 1e-12,
    min_order: float | None = None,
) -> dict:
    """Pass iff the errors never increase (up to ``slack``), the last one meets
    ``threshold`` (if any) and the observed order reaches ``min_order`` (if any)."""
    monotone = all(e2 <= e1 + slack for e1, e2 in zip(errors, errors[1:]))
    ok = monotone and (threshold is None or errors[-1] <= threshold)
    order = None
    if len(errors) > 1 and errors[-1] > 0 and errors[-2] > 0:
        order = float(np.log(errors[-2] / errors[-1]) / np.log(ns[-1] / ns[-2]))
    if min_order is not None:
        ok = ok and (order is None or order >= min_order)
    return {
        "identity": name,
        "alpha": alpha,
        "n": list(ns),
        "errors": [float(e) for e in errors],
        "threshold": threshold,
        "order": order,
        "monotone": monotone,
        "passed": bool(ok),
    }


def continuity_in_alpha(n: int = 1024, near: float = 0.999, tol: float = 1e-2) -> dict:
    """Distance between the order-``near`` and order-1 operators on smooth data."""
    grid = Grid(0.0, 1.0, n)
    g = SampledPath.from_function(grid, np.sin)
    d_int = sup_norm(left_frac_integral(g, near).values - left_frac_integral(g, 1.0).values)
    d_der = sup_norm(
        (caputo_left_derivative(g, near).values - caputo_left_derivative(g, 1.0).values)[SKIP:]
    )
    worst = max(d_int, d_der)
    return {"near": near, "n": n, "integral": d_int, "derivative": d_der, "tol": tol, "passed": worst <= tol}


# -- gradients ------------------------------------------------------------------


def smooth_direction(grid: Grid, m: int, rng: np.random.Generator, modes: int = 4) -> SampledPath:
    """Random band-limited path: a few cosine modes with decaying amplitudes."""
    t = (grid.t - grid.a) / (grid.b - grid.a)
    amp = rng.standard_normal((modes, m))
    phase = rng.uniform(0.0, 2.0 * np.pi, (modes, m))
    vals = np.zeros((len(grid), m))
    for k in range(modes):
        vals += amp[k] * np.cos(np.pi * (k + 1) * t[:, None] + phase[k]) / (k + 1)
    return SampledPath(grid, vals)


def gradient_check(
    prob: ControlProblem,
    n: int = 2048,
    directions: int = 5,
    seed: int = 0,
    eps: float = 1e-4,
    u: SampledPath | None = None,
) -> List[dict]:
    """Adjoint gradient against central differences and the tangent derivative.

    Each row holds, for one random smooth direction ``ubar``: the pairing
    ``<dH/dv, ubar>``, the central difference of the cost at step ``eps``,
    the tangent derivative, ``fd_error = |pair - fd| / (1 + |fd|)`` and
    ``tangent_error = |tangent - pair| / |tangent|``.
    """
    grid = prob.grid(n)
    rng = np.random.default_rng(seed)
    if u is None:
        u = smooth_direction(grid, prob.m, rng)
    grad = gateaux_gradient(prob, u, grid)

    def J(shift):
        uu = u.with_values(u.values + shift)
        return cost(prob, uu, state_solve(prob, uu, grid), grid)

    rows = []
    for k in range(directions):
        ubar = smooth_direction(grid, prob.m, rng)
        pair = inner_product(grad, ubar)
        fd = (J(eps * ubar.values) - J(-eps * ubar.values)) / (2.0 * eps)
        tangent = directional_derivative(prob, u, ubar, grid)
        denom = abs(tangent)
        rows.append(
            {
                "problem": prob.name,
                "direction": k,
                "pairing": pair,
                "central_fd": fd,
                "tangent": tangent,
                "fd_error": abs(pair - fd) / (1.0 + abs(fd)),
                "tangent_error": abs(tangent - pair) / denom if denom > 0 else abs(pair),
            }
        )
    return rows
