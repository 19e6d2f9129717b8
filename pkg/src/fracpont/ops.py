"""Uniform grids, sampled paths and discrete fractional operators.

Left and right Riemann-Liouville integrals are discretised with the
product-trapezoidal rule: the piecewise-linear interpolant of the samples is
integrated exactly against the kernel ``(t - y)**(alpha - 1) / Gamma(alpha)``.
On a uniform grid the resulting weights are Toeplitz apart from the first
column, so a whole path is mapped with one history sum per node (see
:mod:`fracpont.kernels`). Right operators are the left ones conjugated by the
reflection ``t -> a + b - t``.

Caputo derivatives of smooth paths are the fractional integral of order
``1 - alpha`` of the discrete classical derivative, which keeps the kernel
singularity inside the closed-form weights.
"""

from __future__ import annotations

import csv
import functools
import io
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from . import kernels
from .special import gamma_fn

__all__ = [
    "Grid",
    "SampledPath",
    "GridMismatchError",
    "check_order",
    "product_trap_weights",
    "left_frac_integral",
    "right_frac_integral",
    "time_derivative",
    "caputo_left_derivative",
    "rl_right_derivative",
    "inner_product",
    "sup_norm",
    "write_csv",
    "read_csv",
    "write_table",
]

log = logging.getLogger(__name__)


class GridMismatchError(ValueError):
    """Two paths do not live on the same grid or have different widths."""


def check_order(alpha: float, derivative: bool = True) -> float:
    """Validate a fractional order.

    Derivatives accept ``0 < alpha <= 1``; integrals accept any ``alpha >= 0``
    (order 0 is the identity).
    """
    alpha = float(alpha)
    if derivative:
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"derivative order must lie in (0, 1], got {alpha}")
    elif not (alpha >= 0.0 and math.isfinite(alpha)):
        raise ValueError(f"integral order must be a finite real >= 0, got {alpha}")
    return alpha


@dataclass(frozen=True)
class Grid:
    """Uniform mesh ``t_i = a + i h`` on ``[a, b]`` with ``n`` intervals."""

    a: float
    b: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a < self.b):
            raise ValueError(f"need finite a < b, got [{self.a}, {self.b}]")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"need an integer n >= 2, got {self.n}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def t(self) -> np.ndarray:
        return _nodes(self.a, self.b, self.n)

    def __len__(self) -> int:
        return self.n + 1

    def reflect(self, values: np.ndarray) -> np.ndarray:
        """Samples of ``g(a + b - t)`` given samples of ``g``."""
        return np.ascontiguousarray(values[::-1])


@functools.lru_cache(maxsize=64)
def _nodes(a: float, b: float, n: int) -> np.ndarray:
    t = a + (b - a) * np.arange(n + 1) / n
    t[-1] = b
    t.flags.writeable = False
    return t


@dataclass(frozen=True, eq=False)
class SampledPath:
    """A vector-valued function sampled on every node of a grid.

    ``values`` always has shape ``(n + 1, dim)`` and is read-only; 1-D input
    is treated as a scalar path.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != len(self.grid) or v.shape[1] < 1:
            raise ValueError(
                f"values of shape {np.shape(self.values)} do not fit a grid with "
                f"{len(self.grid)} nodes"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("path values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray]) -> "SampledPath":
        """Sample a vectorised ``fn(t)`` on the grid nodes."""
        return cls(grid, fn(grid.t))

    @classmethod
    def constant(cls, grid: Grid, value) -> "SampledPath":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(grid, np.broadcast_to(value, (len(grid), value.size)))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    def with_values(self, values) -> "SampledPath":
        return SampledPath(self.grid, values)

    def reflected(self) -> "SampledPath":
        return SampledPath(self.grid, self.grid.reflect(self.values))

    def __repr__(self):
        return f"SampledPath(grid={self.grid}, dim={self.dim})"


def _same_grid(*paths: SampledPath) -> None:
    g0 = paths[0]
    for p in paths[1:]:
        if p.grid != g0.grid:
            raise GridMismatchError(f"grid mismatch: {g0.grid} vs {p.grid}")
        if p.dim != g0.dim:
            raise GridMismatchError(f"dimension mismatch: {g0.dim} vs {p.dim}")


# -- product-trapezoidal weights -------------------------------------------

_SERIES_CUTOFF = 16
_SERIES_TERMS = 24


def _binom_series(p: float, x: np.ndarray, even_only: bool, sign: float) -> np.ndarray:
    # sum_{k>=2} C(p, k) (sign*x)^k, restricted to even k if requested
    out = np.zeros_like(x)
    coef = p * (p - 1.0) / 2.0
    xk = x * x
    for k in range(2, _SERIES_TERMS + 2):
        if not even_only or k % 2 == 0:
            out += coef * xk * (sign**k)
        coef *= (p - k) / (k + 1.0)
        xk = xk * x
    return out


@functools.lru_cache(maxsize=128)
def product_trap_weights(n: int, alpha: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Weights of the left product-trapezoidal integral of order ``alpha``.

    Returns ``(c, a0, scale)`` such that, with ``h`` the grid step,

        I(t_i) = scale * h**alpha * (a0[i] g_0 + sum_{j=1..i} c[i-j] g_j),

    where ``scale = 1 / Gamma(alpha + 2)``. The arrays have length ``n + 1``
    and are read-only (shared through the cache).
    """
    alpha = check_order(alpha, derivative=False)
    if alpha == 0.0:
        raise ValueError("order 0 is the identity and has no quadrature weights")
    p = alpha + 1.0
    k = np.arange(n + 1, dtype=np.float64)

    # c_k = (k+1)^p + (k-1)^p - 2 k^p; binomial series once cancellation bites
    c = np.empty(n + 1)
    c[0] = 1.0
    if n >= 1:
        c[1] = 2.0**p - 2.0
    small = (k >= 2) & (k <= _SERIES_CUTOFF)
    ks = k[small]
    c[small] = (ks + 1.0) ** p + (ks - 1.0) ** p - 2.0 * ks**p
    big = k > _SERIES_CUTOFF
    kb = k[big]
    c[big] = kb**p * 2.0 * _binom_series(p, 1.0 / kb, even_only=True, sign=1.0)

    # a0_i = (i-1)^p - (i-1-alpha) i^alpha = i^p [(1 - 1/i)^p - 1 + p/i]
    a0 = np.empty(n + 1)
    a0[0] = 0.0
    if n >= 1:
        a0[1] = alpha
    a0[small] = (ks - 1.0) ** p - (ks - 1.0 - alpha) * ks**alpha
    a0[big] = kb**p * _binom_series(p, 1.0 / kb, even_only=False, sign=-1.0)

    c.flags.writeable = False
    a0.flags.writeable = False
    return c, a0, 1.0 / gamma_fn(alpha + 2.0)


def _left_integral_values(values: np.ndarray, grid: Grid, alpha: float) -> np.ndarray:
    if alpha == 0.0:
        return np.array(values, dtype=np.float64)
    c, a0, scale = product_trap_weights(grid.n, alpha)
    out = kernels.lower_apply(c, a0, np.ascontiguousarray(values, dtype=np.float64))
    out *= scale * grid.h**alpha
    return out


def _right_integral_values(values: np.ndarray, grid: Grid, alpha: float) -> np.ndarray:
    return grid.reflect(_left_integral_values(grid.reflect(values), grid, alpha))


def left_frac_integral(g: SampledPath, alpha: float) -> SampledPath:
    """Left Riemann-Liouville integral with inferior limit ``a``.

    Accepts any order ``alpha >= 0``; the value at ``t_0`` is 0 for
    ``alpha > 0``.
    """
    alpha = check_order(alpha, derivative=False)
    return g.with_values(_left_integral_values(g.values, g.grid, alpha))


def right_frac_integral(g: SampledPath, alpha: float) -> SampledPath:
    """Right Riemann-Liouville integral with superior limit ``b``.

    Computed by reflecting, applying the left integral and reflecting back,
    so it vanishes at ``t_n`` and mirrors :func:`left_frac_integral` exactly.
    """
    alpha = check_order(alpha, derivative=False)
    return g.with_values(_right_integral_values(g.values, g.grid, alpha))


def _dt(values: np.ndarray, grid: Grid) -> np.ndarray:
    # centred differences inside, second-order one-sided at the ends
    return np.gradient(values, grid.h, axis=0, edge_order=2)


def time_derivative(g: SampledPath) -> SampledPath:
    """Second-order discrete classical derivative of a path."""
    return g.with_values(_dt(g.values, g.grid))


def caputo_left_derivative(g: SampledPath, alpha: float) -> SampledPath:
    """Left Caputo derivative of a path sampled from a C^1 function.

    Evaluated as the left integral of order ``1 - alpha`` of the discrete
    derivative; for ``alpha = 1`` this is the discrete derivative itself.
    """
    alpha = check_order(alpha)
    dg = _dt(g.values, g.grid)
    if alpha == 1.0:
        return g.with_values(dg)
    return g.with_values(_left_integral_values(dg, g.grid, 1.0 - alpha))


def rl_right_derivative(
    g: SampledPath, alpha: float, caputo: bool = False, terminal_tol: float = 1e-8
) -> SampledPath:
    """Right fractional derivative ``-I_+^{1-alpha}`` of the discrete derivative.

    This is the right Caputo derivative, which equals the Riemann-Liouville
    one when ``g(b) = 0``. With ``caputo=False`` a warning is logged if
    ``|g(b)|`` exceeds ``terminal_tol``, since the two then differ.
    """
    alpha = check_order(alpha)
    if not caputo:
        gb = float(np.max(np.abs(g.values[-1])))
        if gb > terminal_tol:
            log.warning(
                "rl_right_derivative: |g(b)| = %.3e > %.1e; returning the Caputo "
                "derivative, which differs from Riemann-Liouville here",
                gb,
                terminal_tol,
            )
    dg = _dt(g.values, g.grid)
    if alpha == 1.0:
        return g.with_values(-dg)
    return g.with_values(-_right_integral_values(dg, g.grid, 1.0 - alpha))


def _trapezoid(values: np.ndarray, h: float) -> float:
    return float(h * (values.sum(axis=0) - 0.5 * (values[0] + values[-1])).sum())


def inner_product(g1: SampledPath, g2: SampledPath) -> float:
    """Trapezoidal approximation of the L^2 pairing on ``[a, b]``."""
    _same_grid(g1, g2)
    return _trapezoid(np.einsum("ij,ij->i", g1.values, g2.values)[:, None], g1.grid.h)


def sup_norm(g: SampledPath | np.ndarray) -> float:
    v = g.values if isinstance(g, SampledPath) else np.asarray(g)
    return float(np.max(np.abs(v))) if v.size else 0.0


# -- CSV ----------------------------------------------------------------------

_FMT = "{:.17g}"


def write_table(target, t: np.ndarray, columns: Mapping[str, np.ndarray]) -> None:
    """Write ``t`` and the given columns as CSV (17 significant digits)."""
    cols = [np.asarray(v, dtype=float).reshape(len(t), -1) for v in columns.values()]
    header = ["t"]
    for name, v in zip(columns, cols):
        header += [name] if v.shape[1] == 1 else [f"{name}{k + 1}" for k in range(v.shape[1])]
    data = np.hstack([np.asarray(t, dtype=float)[:, None]] + cols)

    def _emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in data:
            w.writerow([_FMT.format(x) for x in row])

    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", newline="", encoding="utf-8") as fh:
            _emit(fh)
    else:
        _emit(target)


def write_csv(target, g: SampledPath) -> None:
    """Emit a path as ``t,v1,...,vdim``."""
    write_table(target, g.t, {f"v{k + 1}": g.values[:, k] for k in range(g.dim)})


def read_csv(source) -> SampledPath:
    """Read a path written by :func:`write_csv` (any ``t,...`` table works).

    The grid is rebuilt from the first and last ``t`` and the row count; a
    non-uniform ``t`` column is rejected.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], [r for r in rows[1:] if r]
    if not header or header[0] != "t" or len(header) < 2:
        raise ValueError(f"expected a 't,...' header, got {header}")
    data = np.array([[float(x) for x in r] for r in body])
    t = data[:, 0]
    grid = Grid(t[0], t[-1], len(t) - 1)
    if not np.allclose(t, grid.t, rtol=0, atol=1e-12 * max(1.0, abs(grid.b))):
        raise ValueError("t column is not a uniform grid")
    return SampledPath(grid, data[:, 1:])


def stack(paths: Iterable[SampledPath]) -> SampledPath:
    """Concatenate path components column-wise."""
    paths = list(paths)
    for p in paths[1:]:
        if p.grid != paths[0].grid:
            raise GridMismatchError("cannot stack paths on different grids")
    return SampledPath(paths[0].grid, np.hstack([p.values for p in paths]))
