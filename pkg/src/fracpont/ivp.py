"""Fractional initial and terminal value problems by Picard iteration.

A left Caputo problem ``cD^alpha_- g = F(g, t), g(a) = A`` is solved as the
fixed point of ``g -> A + I^alpha_-(F(g, .))`` over whole sampled paths,
starting from the constant path ``A``. Right problems are reflected onto
left ones.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .ops import Grid, SampledPath, _left_integral_values, check_order
from .special import NonConvergenceError

__all__ = [
    "VectorField",
    "IvpSpec",
    "IvpResult",
    "PicardOverflowError",
    "NonConvergenceError",
    "solve_left_ivp",
    "solve_right_terminal",
]

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_PICARD = 200


class PicardOverflowError(OverflowError):
    """Picard iterates left the range of finite floats."""


@dataclass(frozen=True)
class VectorField:
    """Right-hand side ``F`` of a fractional Cauchy problem.

    ``eval(x, t)`` receives a whole path: ``x`` of shape ``(n + 1, d)`` and the
    matching node times ``t`` of shape ``(n + 1,)``, and returns an array of
    shape ``(n + 1, d)``. Row ``i`` must only depend on ``x[i]`` and ``t[i]``
    (plus any data the field captured on the same grid). ``lipschitz_hint`` is
    informational and never enforced.
    """

    eval: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lipschitz_hint: Optional[float] = None

    def __call__(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        return np.asarray(self.eval(x, t), dtype=np.float64).reshape(x.shape)


@dataclass(frozen=True)
class IvpSpec:
    alpha: float
    initial: np.ndarray
    grid: Grid
    tol: float = DEFAULT_TOL
    max_picard: int = DEFAULT_MAX_PICARD

    def __post_init__(self):
        check_order(self.alpha)
        object.__setattr__(self, "initial", np.atleast_1d(np.asarray(self.initial, dtype=float)))
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.max_picard) != self.max_picard or self.max_picard < 1:
            raise ValueError(f"max_picard must be a positive integer, got {self.max_picard}")


@dataclass(frozen=True, eq=False)
class IvpResult:
    """Solution path plus the Picard diagnostics."""

    path: SampledPath
    residual: float
    iterations: int
    distances: tuple = field(default=(), repr=False)


def _picard(field_: VectorField, spec: IvpSpec) -> IvpResult:
    grid = spec.grid
    t = grid.t
    a_row = spec.initial[None, :]
    g = np.broadcast_to(a_row, (len(grid), spec.initial.size)).copy()
    distances = []
    for it in range(1, spec.max_picard + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            nxt = a_row + _left_integral_values(field_(g, t), grid, spec.alpha)
        if not np.all(np.isfinite(nxt)):
            raise PicardOverflowError(f"Picard iterate {it} is not finite")
        dist = float(np.max(np.abs(nxt - g)))
        distances.append(dist)
        # dist is the fixed-point residual of g and the step to the next iterate
        if dist <= spec.tol / 10.0:
            return IvpResult(SampledPath(grid, g), dist, it, tuple(distances))
        g = nxt
    raise NonConvergenceError(
        f"Picard iteration did not reach tol={spec.tol:g} in {spec.max_picard} "
        f"sweeps (last residual {distances[-1]:.3e})"
    )


def solve_left_ivp(field_: VectorField, spec: IvpSpec, full: bool = False):
    """Solve ``cD^alpha_- g = F(g, t)``, ``g(a) = A`` on ``spec.grid``.

    Returns the path (or an :class:`IvpResult` with ``full=True``). The
    returned path satisfies ``|g - (A + I^alpha_- F(g))|_inf <= tol / 10`` and
    ``g(t_0) = A`` exactly.

    Raises
    ------
    NonConvergenceError
        ``spec.max_picard`` sweeps were not enough; the message carries the
        last residual.
    PicardOverflowError
        An iterate became infinite or NaN.
    """
    res = _picard(field_, spec)
    return res if full else res.path


def reflect_field(field_: VectorField, grid: Grid) -> VectorField:
    """Field of the left problem obtained through ``t -> a + b - t``."""

    def _eval(y, s):
        return grid.reflect(field_(grid.reflect(y), grid.reflect(grid.a + grid.b - s)))

    return VectorField(_eval, field_.lipschitz_hint)


def solve_right_terminal(
    field_: VectorField,
    terminal,
    alpha: float,
    grid: Grid,
    tol: float = DEFAULT_TOL,
    max_picard: int = DEFAULT_MAX_PICARD,
    full: bool = False,
):
    """Solve the right problem ``D^alpha_+ p = G(p, t)``, ``p(b) = terminal``.

    The derivative is the right Caputo one (Riemann-Liouville when the
    terminal value is 0). The problem is reflected to a left problem, solved
    with :func:`solve_left_ivp`, and reflected back, so ``p(t_n)`` equals
    ``terminal`` exactly.
    """
    spec = IvpSpec(alpha, terminal, grid, tol, max_picard)
    res = _picard(reflect_field(field_, grid), spec)
    path = res.path.reflected()
    if full:
        return IvpResult(path, res.residual, res.iterations, res.distances)
    return path
