"""Fractional optimal control: state, adjoint, cost, gradient and sweep.

Problem callables are vectorised over the grid nodes. With ``N`` points,
``x`` has shape ``(N, d)``, ``v`` has shape ``(N, m)`` and ``t`` has shape
``(N,)``, and the callables return

==========  ===============
``L``       ``(N,)``
``dLdx``    ``(N, d)``
``dLdv``    ``(N, m)``
``f``       ``(N, d)``
``dfdx``    ``(N, d, d)``
``dfdv``    ``(N, d, m)``
==========  ===============

The gradient of the cost at a control ``u`` is ``dH/dv(q, u, p, t)`` with
``q`` the state and ``p`` the adjoint; a control is critical exactly when it
vanishes. :func:`pontryagin_sweep` looks for such controls by steepest
descent. It reports critical points, not certified minimisers.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .ivp import (
    DEFAULT_MAX_PICARD,
    DEFAULT_TOL,
    IvpSpec,
    VectorField,
    solve_left_ivp,
    solve_right_terminal,
)
from .ops import Grid, SampledPath, _trapezoid, check_order, inner_product, sup_norm, write_table
from .special import mittag_leffler

__all__ = [
    "ControlProblem",
    "PartialsMismatchError",
    "finite_difference_partials",
    "hamiltonian",
    "dHdx",
    "dHdv",
    "dHdw",
    "state_solve",
    "adjoint_solve",
    "cost",
    "gateaux_gradient",
    "solve_linearized",
    "directional_derivative",
    "SweepConfig",
    "PontryaginIterate",
    "pontryagin_sweep",
    "stability_ratio",
    "gronwall_bound",
    "write_iterate",
    "MIN_SWEEP_INTERVALS",
]

log = logging.getLogger(__name__)

MIN_SWEEP_INTERVALS = 8

Fn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class PartialsMismatchError(ValueError):
    """Supplied partial derivatives disagree with finite differences."""


@dataclass(frozen=True, eq=False)
class ControlProblem:
    """Lagrangian ``L``, constraint ``f`` and data of a control problem.

    ``lipschitz`` is the advisory Lipschitz constant of ``f`` in ``x``.
    ``partials`` records where the derivative callables came from
    (``"analytic"`` or ``"finite_difference"``).
    """

    d: int
    m: int
    a: float
    b: float
    alpha: float
    initial: np.ndarray
    L: Fn
    dLdx: Fn
    dLdv: Fn
    f: Fn
    dfdx: Fn
    dfdv: Fn
    lipschitz: Optional[float] = None
    name: str = "custom"
    partials: str = "analytic"

    def __post_init__(self):
        check_order(self.alpha)
        if self.d < 1 or self.m < 1:
            raise ValueError("dimensions d and m must be positive")
        if not self.a < self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")
        init = np.atleast_1d(np.asarray(self.initial, dtype=float))
        if init.shape != (self.d,):
            raise ValueError(f"initial state must have {self.d} entries, got {init.shape}")
        init.flags.writeable = False
        object.__setattr__(self, "initial", init)

    def grid(self, n: int) -> Grid:
        return Grid(self.a, self.b, n)

    def with_alpha(self, alpha: float) -> "ControlProblem":
        return replace(self, alpha=alpha)

    def validate(self, n_points: int = 20, rtol: float = 1e-5, seed: int = 0) -> float:
        """Check the partials against central differences at random points.

        The error at each entry is ``|fd - exact| / (1 + |exact|)``; the
        largest one is returned, and :class:`PartialsMismatchError` is raised
        if it exceeds ``rtol``.
        """
        rng = np.random.default_rng(seed)
        x = rng.uniform(-2.0, 2.0, (n_points, self.d))
        v = rng.uniform(-2.0, 2.0, (n_points, self.m))
        t = rng.uniform(self.a, self.b, n_points)
        fd = finite_difference_partials(self.L, self.f, self.d, self.m)
        worst, where = 0.0, ""
        for name in ("dLdx", "dLdv", "dfdx", "dfdv"):
            exact = np.asarray(getattr(self, name)(x, v, t), dtype=float)
            approx = np.asarray(fd[name](x, v, t), dtype=float)
            if exact.shape != approx.shape:
                raise PartialsMismatchError(f"{name} has shape {exact.shape}, expected {approx.shape}")
            err = float(np.max(np.abs(approx - exact) / (1.0 + np.abs(exact))))
            if err > worst:
                worst, where = err, name
        if worst > rtol:
            raise PartialsMismatchError(
                f"{self.name}: {where} disagrees with finite differences (error {worst:.2e})"
            )
        return worst


def _fd_step(z: np.ndarray) -> np.ndarray:
    return 1e-5 * np.maximum(1.0, np.abs(z))


def finite_difference_partials(L: Fn, f: Fn, d: int, m: int) -> dict:
    """Central-difference partials of ``L`` and ``f``.

    Meant for prototyping custom problems: accuracy is roughly 1e-10
    relative, well below that of analytic partials, and each call costs
    ``2 (d + m)`` evaluations.
    """

    def _grad(fun, which, dim):
        def partial(x, v, t):
            x = np.asarray(x, dtype=float)
            v = np.asarray(v, dtype=float)
            args = [x, v]
            base = args[which]
            cols = []
            for k in range(dim):
                step = _fd_step(base[:, k])
                up, dn = base.copy(), base.copy()
                up[:, k] += step
                dn[:, k] -= step
                a_up, a_dn = list(args), list(args)
                a_up[which], a_dn[which] = up, dn
                diff = np.asarray(fun(*a_up, t)) - np.asarray(fun(*a_dn, t))
                cols.append(diff / (2.0 * step.reshape((-1,) + (1,) * (diff.ndim - 1))))
            return np.stack(cols, axis=-1)

        return partial

    return {
        "dLdx": _grad(L, 0, d),
        "dLdv": _grad(L, 1, m),
        "dfdx": _grad(f, 0, d),
        "dfdv": _grad(f, 1, m),
    }


# -- Hamiltonian ----------------------------------------------------------


def hamiltonian(prob: ControlProblem, x, v, w, t) -> np.ndarray:
    """``H = L + w . f``, vectorised over rows."""
    return prob.L(x, v, t) + np.einsum("ni,ni->n", w, prob.f(x, v, t))


def dHdx(prob: ControlProblem, x, v, w, t) -> np.ndarray:
    return prob.dLdx(x, v, t) + np.einsum("nij,ni->nj", prob.dfdx(x, v, t), w)


def dHdv(prob: ControlProblem, x, v, w, t) -> np.ndarray:
    return prob.dLdv(x, v, t) + np.einsum("nij,ni->nj", prob.dfdv(x, v, t), w)


def dHdw(prob: ControlProblem, x, v, w, t) -> np.ndarray:
    return np.asarray(prob.f(x, v, t))


# -- state / adjoint ------------------------------------------------------


def _check_path(path: SampledPath, grid: Grid, dim: int, what: str) -> None:
    if path.grid != grid:
        raise ValueError(f"{what} lives on {path.grid}, expected {grid}")
    if path.dim != dim:
        raise ValueError(f"{what} has dimension {path.dim}, expected {dim}")


def state_solve(
    prob: ControlProblem,
    u: SampledPath,
    grid: Grid,
    tol: float = DEFAULT_TOL,
    max_picard: int = DEFAULT_MAX_PICARD,
) -> SampledPath:
    """State ``q`` with ``cD^alpha_- q = f(q, u, t)``, ``q(a) = A``."""
    _check_path(u, grid, prob.m, "control")
    uv = u.values
    field_ = VectorField(lambda x, t: prob.f(x, uv, t), prob.lipschitz)
    return solve_left_ivp(field_, IvpSpec(prob.alpha, prob.initial, grid, tol, max_picard))


def adjoint_solve(
    prob: ControlProblem,
    u: SampledPath,
    q: SampledPath,
    grid: Grid,
    tol: float = DEFAULT_TOL,
    max_picard: int = DEFAULT_MAX_PICARD,
) -> SampledPath:
    """Adjoint ``p`` with ``D^alpha_+ p = dH/dx(q, u, p, t)``, ``p(b) = 0``."""
    _check_path(u, grid, prob.m, "control")
    _check_path(q, grid, prob.d, "state")
    t = grid.t
    qv, uv = q.values, u.values
    source = np.asarray(prob.dLdx(qv, uv, t), dtype=float)
    jac_t = np.ascontiguousarray(np.swapaxes(prob.dfdx(qv, uv, t), 1, 2))
    field_ = VectorField(lambda w, _t: source + np.einsum("nij,nj->ni", jac_t, w), prob.lipschitz)
    return solve_right_terminal(field_, np.zeros(prob.d), prob.alpha, grid, tol, max_picard)


def cost(prob: ControlProblem, u: SampledPath, q: SampledPath, grid: Grid) -> float:
    """Trapezoidal value of the integral of ``L(q, u, t)`` over ``[a, b]``."""
    vals = np.asarray(prob.L(q.values, u.values, grid.t), dtype=float)
    return _trapezoid(vals[:, None], grid.h)


def _gradient_parts(prob, u, grid, tol, max_picard):
    q = state_solve(prob, u, grid, tol, max_picard)
    p = adjoint_solve(prob, u, q, grid, tol, max_picard)
    g = dHdv(prob, q.values, u.values, p.values, grid.t)
    return q, p, SampledPath(grid, g)


def gateaux_gradient(
    prob: ControlProblem,
    u: SampledPath,
    grid: Grid,
    tol: float = DEFAULT_TOL,
    max_picard: int = DEFAULT_MAX_PICARD,
) -> SampledPath:
    """Gradient path ``t -> dH/dv(q^u, u, p^u, t)`` of the cost.

    Its trapezoidal pairing with a direction ``ubar`` approximates the
    Gateaux derivative of the cost at ``u`` along ``ubar``.
    """
    return _gradient_parts(prob, u, grid, tol, max_picard)[2]


def solve_linearized(
    prob: ControlProblem,
    u: SampledPath,
    ubar: SampledPath,
    grid: Grid,
    tol: float = DEFAULT_TOL,
    max_picard: int = DEFAULT_MAX_PICARD,
    q: Optional[SampledPath] = None,
) -> SampledPath:
    """Tangent state ``qbar``: ``cD qbar = f_x qbar + f_v ubar``, ``qbar(a) = 0``."""
    _check_path(ubar, grid, prob.m, "direction")
    if q is None:
        q = state_solve(prob, u, grid, tol, max_picard)
    t = grid.t
    jx = np.asarray(prob.dfdx(q.values, u.values, t), dtype=float)
    forcing = np.einsum("nij,nj->ni", prob.dfdv(q.values, u.values, t), ubar.values)
    field_ = VectorField(lambda x, _t: np.einsum("nij,nj->ni", jx, x) + forcing, prob.lipschitz)
    return solve_left_ivp(field_, IvpSpec(prob.alpha, np.zeros(prob.d), grid, tol, max_picard))


def directional_derivative(
    prob: ControlProblem,
    u: SampledPath,
    ubar: SampledPath,
    grid: Grid,
    tol: float = DEFAULT_TOL,
    max_picard: int = DEFAULT_MAX_PICARD,
) -> float:
    """Gateaux derivative through the tangent state (no adjoint involved)."""
    q = state_solve(prob, u, grid, tol, max_picard)
    qbar = solve_linearized(prob, u, ubar, grid, tol, max_picard, q=q)
    t = grid.t
    integrand = np.einsum("ni,ni->n", prob.dLdx(q.values, u.values, t), qbar.values)
    integrand += np.einsum("ni,ni->n", prob.dLdv(q.values, u.values, t), ubar.values)
    return _trapezoid(integrand[:, None], grid.h)


# -- sweep ------------------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    max_outer: int = 200
    grad_tol: float = 1e-6
    step0: float = 1.0
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    ivp_tol: float = DEFAULT_TOL
    max_backtracks: int = 40
    max_picard: int = DEFAULT_MAX_PICARD
    cost_slack: float = 1e-8

    def __post_init__(self):
        if int(self.max_outer) != self.max_outer or self.max_outer < 1:
            raise ValueError("max_outer must be a positive integer")
        for name in ("grad_tol", "step0", "ivp_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.cost_slack < 1e-3:
            raise ValueError("cost_slack must lie in [0, 1e-3)")
        for name in ("armijo_c", "backtrack"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class PontryaginIterate:
    """State of the sweep: the triple ``(q, u, p)`` and its diagnostics.

    ``stationarity`` is the sup norm of ``dH/dv`` along the triple.
    ``cost_history`` holds the cost of every accepted iterate, the initial
    control first.
    """

    q: SampledPath
    u: SampledPath
    p: SampledPath
    cost: float
    stationarity: float
    iteration: int
    converged: bool
    gradient: SampledPath = field(repr=False)
    cost_history: tuple = field(default=(), repr=False)
    message: str = ""

    @property
    def grid(self) -> Grid:
        return self.u.grid

    def summary(self) -> dict:
        return {
            "cost": self.cost,
            "stationarity": self.stationarity,
            "iterations": self.iteration,
            "converged": bool(self.converged),
            "message": self.message,
        }


def pontryagin_sweep(
    prob: ControlProblem,
    u0: SampledPath,
    grid: Grid,
    cfg: SweepConfig = SweepConfig(),
) -> PontryaginIterate:
    """Steepest descent on the control, driven by the adjoint gradient.

    Each outer iteration solves the state and adjoint problems, takes
    ``u - s * dH/dv`` and backtracks ``s`` from ``cfg.step0`` until the
    Armijo condition holds. Stops once the sup norm of ``dH/dv`` is at most
    ``cfg.grad_tol``. Hitting ``cfg.max_outer`` or failing the line search
    returns the last accepted iterate with ``converged=False``.

    For ``alpha < 1`` the reflected adjoint is consistent with, but not the
    exact transpose of, the discrete state scheme, so near the critical
    point ``-dH/dv`` can stop being a descent direction of the discrete
    cost. A trial step that fails Armijo is then still accepted when its
    cost exceeds the current one by at most ``cfg.cost_slack * (1 + |J|)``
    and it strictly lowers the stationarity residual. Accepted costs are
    therefore nonincreasing up to that slack.
    """
    if grid.n < MIN_SWEEP_INTERVALS:
        raise ValueError(f"sweeps need at least {MIN_SWEEP_INTERVALS} intervals, got n={grid.n}")
    _check_path(u0, grid, prob.m, "initial control")
    tol, mp = cfg.ivp_tol, cfg.max_picard

    u = u0
    q, p, g = _gradient_parts(prob, u, grid, tol, mp)
    J = cost(prob, u, q, grid)
    history = [J]
    stat = sup_norm(g)
    iteration = 0
    message = "max_outer reached"
    converged = stat <= cfg.grad_tol
    while not converged and iteration < cfg.max_outer:
        gg = inner_product(g, g)
        slack = cfg.cost_slack * (1.0 + abs(J))
        step = cfg.step0
        accepted = None
        for _ in range(cfg.max_backtracks):
            u_try = u.with_values(u.values - step * g.values)
            q_try = state_solve(prob, u_try, grid, tol, mp)
            J_try = cost(prob, u_try, q_try, grid)
            if J_try <= J - cfg.armijo_c * step * gg:
                p_try = adjoint_solve(prob, u_try, q_try, grid, tol, mp)
                accepted = (u_try, q_try, J_try, p_try)
                break
            if J_try <= J + slack:
                p_try = adjoint_solve(prob, u_try, q_try, grid, tol, mp)
                g_try = dHdv(prob, q_try.values, u_try.values, p_try.values, grid.t)
                if float(np.max(np.abs(g_try))) < stat:
                    accepted = (u_try, q_try, J_try, p_try)
                    break
            step *= cfg.backtrack
        if accepted is None:
            message = "line search failed"
            log.info("sweep: line search failed at iteration %d (|g| = %.3e)", iteration, stat)
            break
        u, q, J, p = accepted
        g = SampledPath(grid, dHdv(prob, q.values, u.values, p.values, grid.t))
        stat = sup_norm(g)
        history.append(J)
        iteration += 1
        log.debug("sweep %d: cost %.12g, |dH/dv| %.3e, step %.3g", iteration, J, stat, step)
        converged = stat <= cfg.grad_tol
    if converged:
        message = "stationarity reached"
    return PontryaginIterate(q, u, p, J, stat, iteration, converged, g, tuple(history), message)


def write_iterate(it: PontryaginIterate, csv_path, summary_path, extra: Optional[dict] = None) -> None:
    """Write ``t, q.., u.., p.., dHdv..`` as CSV and the JSON summary."""
    write_table(
        csv_path,
        it.grid.t,
        {"q": it.q.values, "u": it.u.values, "p": it.p.values, "dHdv": it.gradient.values},
    )
    summary = it.summary()
    if extra:
        summary.update(extra)
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- stability and growth diagnostics -------------------------------------------


def stability_ratio(
    prob: ControlProblem,
    u: SampledPath,
    ubar: SampledPath,
    eps: float,
    grid: Grid,
    order: int = 2,
    tol: float = DEFAULT_TOL,
    max_picard: int = DEFAULT_MAX_PICARD,
) -> float:
    """Perturbation ratio of the state under ``u -> u + eps * ubar``.

    ``order=1`` gives ``|q(u + eps ubar) - q(u)|_inf / |eps|``; ``order=2``
    gives ``|q(u + eps ubar) - q(u) - eps qbar|_inf / eps**2``. Both stay
    bounded as ``eps -> 0``.
    """
    if not 0 < abs(eps) < 1:
        raise ValueError(f"need 0 < |eps| < 1, got {eps}")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    q = state_solve(prob, u, grid, tol, max_picard)
    q_eps = state_solve(prob, u.with_values(u.values + eps * ubar.values), grid, tol, max_picard)
    diff = q_eps.values - q.values
    if order == 1:
        return sup_norm(diff) / abs(eps)
    qbar = solve_linearized(prob, u, ubar, grid, tol, max_picard, q=q)
    return sup_norm(diff - eps * qbar.values) / eps**2


def gronwall_bound(k1: float, k2: float, alpha: float, t: float, a: float) -> float:
    """Fractional Gronwall bound ``k2 * E_{alpha,1}(k1 (t - a)^alpha)``."""
    if t < a:
        raise ValueError(f"need t >= a, got t={t} < a={a}")
    if k1 < 0 or k2 < 0:
        raise ValueError("k1 and k2 must be nonnegative")
    check_order(alpha, derivative=False)
    if k2 == 0:
        return 0.0
    return k2 * mittag_leffler(alpha, 1.0, k1 * (t - a) ** alpha)
