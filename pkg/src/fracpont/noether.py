"""Symmetries of fractional Pontryagin systems and their Noether series.

A symmetry is a triple of one-parameter groups acting on ``(q, u, p)``.
The conserved quantity attached to it is an infinite series of iterated
fractional integrals and classical derivatives of ``g = dphi1/ds(0, q)``
and ``p``; here it is truncated at ``r_max`` and evaluated on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.signal import savgol_filter

from .ocp import ControlProblem, PontryaginIterate, hamiltonian
from .ops import (
    Grid,
    GridMismatchError,
    SampledPath,
    _dt,
    _left_integral_values,
    _right_integral_values,
    _same_grid,
    caputo_left_derivative,
    check_order,
    rl_right_derivative,
)
from .special import gamma_fn

__all__ = [
    "GroupAxiomError",
    "ResolutionError",
    "OneParamGroup",
    "rotation_group",
    "scaling_group",
    "translation_group",
    "SymmetryTriple",
    "SeriesTruncation",
    "ConservedSeries",
    "invariance_residual",
    "torres_frederico_residual",
    "conserved_quantity",
    "drift_report",
    "MAX_R",
]

MAX_R = 6
# nodes per retained derivative order; r_max = 6 needs n >= 384
NODES_PER_ORDER = 64
SCHEMES = ("finite_difference", "polynomial_fit")
# relative size of the roundoff in a sampled path, used to pick FD strides
_EPS = 1e-15


class GroupAxiomError(ValueError):
    """A one-parameter group failed its identity, group-law or generator check."""


class ResolutionError(ValueError):
    """The grid is too coarse for the requested truncation order."""


# -- one-parameter groups -----------------------------------------------------


@dataclass(frozen=True)
class OneParamGroup:
    """A family ``phi(s, .)`` of diffeomorphisms of ``R^dim``.

    ``phi(s, x)`` and ``generator(x)`` must accept ``x`` of shape
    ``(..., dim)`` and act on the last axis, so whole paths can be moved at
    once. ``generator`` is ``dphi/ds`` at ``s = 0``.
    """

    dim: int
    phi: Callable[[float, np.ndarray], np.ndarray]
    generator: Callable[[np.ndarray], np.ndarray]
    name: str = "group"

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")

    def __call__(self, s: float, x) -> np.ndarray:
        return np.asarray(self.phi(s, np.asarray(x, dtype=float)), dtype=float)

    def check(self, n_samples: int = 16, seed: int = 0, scale: float = 2.0) -> None:
        """Verify the group axioms at random ``(s, s', x)``.

        Identity to 1e-12, group law to 1e-8 and the generator against a
        central difference in ``s`` to 1e-6, all relative to ``1 + |x|``.

        Raises
        ------
        GroupAxiomError
            With the failing axiom and its error.
        """
        rng = np.random.default_rng(seed)
        x = rng.uniform(-scale, scale, size=(n_samples, self.dim))
        s = rng.uniform(-1.0, 1.0, size=n_samples)
        s2 = rng.uniform(-1.0, 1.0, size=n_samples)
        size = 1.0 + np.max(np.abs(x))
        err = np.max(np.abs(self(0.0, x) - x)) / size
        if err > 1e-12:
            raise GroupAxiomError(f"{self.name}: phi(0, x) != x (error {err:.3e})")
        for si, sj, xi in zip(s, s2, x):
            lhs = self(si, self(sj, xi))
            err = np.max(np.abs(lhs - self(si + sj, xi))) / (1.0 + np.max(np.abs(lhs)))
            if err > 1e-8:
                raise GroupAxiomError(f"{self.name}: group law fails at s={si:.3g}, s'={sj:.3g} (error {err:.3e})")
        eps = 1e-5
        fd = (self(eps, x) - self(-eps, x)) / (2 * eps)
        err = np.max(np.abs(fd - np.asarray(self.generator(x), dtype=float))) / size
        if err > 1e-6:
            raise GroupAxiomError(f"{self.name}: generator disagrees with dphi/ds (error {err:.3e})")


def _rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def rotation_group(theta: float) -> OneParamGroup:
    """Planar rotations ``phi(s, x) = R(s theta) x``; generator ``theta (-x2, x1)``."""
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")

    def phi(s, x):
        return x @ _rotation(s * theta).T

    def generator(x):
        return theta * np.stack([-x[..., 1], x[..., 0]], axis=-1)

    return OneParamGroup(2, phi, generator, name=f"rotation({theta:g})")


def scaling_group(dim: int, rate: float = 1.0) -> OneParamGroup:
    """Dilations ``phi(s, x) = exp(s rate) x``."""
    rate = float(rate)
    return OneParamGroup(
        dim, lambda s, x: math.exp(s * rate) * x, lambda x: rate * x, name=f"scaling({rate:g})"
    )


def translation_group(direction) -> OneParamGroup:
    """Translations ``phi(s, x) = x + s c`` along a fixed vector ``c``."""
    c = np.atleast_1d(np.asarray(direction, dtype=float))
    return OneParamGroup(
        c.size,
        lambda s, x: x + s * c,
        lambda x: np.broadcast_to(c, np.shape(x)).copy(),
        name="translation",
    )


@dataclass(frozen=True)
class SymmetryTriple:
    """Groups acting on the state (``phi1``), control (``phi2``) and costate (``phi3``)."""

    phi1: OneParamGroup
    phi2: OneParamGroup
    phi3: OneParamGroup

    def check_dims(self, prob: ControlProblem) -> None:
        want = (prob.d, prob.m, prob.d)
        got = (self.phi1.dim, self.phi2.dim, self.phi3.dim)
        if got != want:
            raise GridMismatchError(f"triple acts on dimensions {got}, problem needs {want}")

    @classmethod
    def rotations(cls, theta1: float, theta2: float, theta3: float) -> "SymmetryTriple":
        return cls(rotation_group(theta1), rotation_group(theta2), rotation_group(theta3))


# -- invariance and the Torres-Frederico relation ----------------------------------


def invariance_residual(
    prob: ControlProblem,
    triple: SymmetryTriple,
    sol: PontryaginIterate,
    s_values: Iterable[float],
    grid: Optional[Grid] = None,
) -> float:
    """Largest defect of ``H - p . cD^alpha_- q`` under the action of ``triple``.

    Evaluates, over the given group parameters and every node,
    ``|H(phi1 q, phi2 u, phi3 p, t) - phi3 p . cD(phi1 q) - H(q, u, p, t) + p . cD q|``.
    Invariance is checked on the supplied solution only; the derivative uses
    the discrete Caputo operator, so expect a floor of its truncation error.
    """
    triple.check_dims(prob)
    grid = sol.grid if grid is None else grid
    if sol.grid != grid:
        raise GridMismatchError(f"solution lives on {sol.grid}, not {grid}")
    s_values = [float(s) for s in s_values]
    if not all(math.isfinite(s) for s in s_values):
        raise ValueError("s_values must be finite")
    q, u, p, t = sol.q.values, sol.u.values, sol.p.values, grid.t
    alpha = prob.alpha

    def lagr(x, v, w):
        cd = caputo_left_derivative(SampledPath(grid, x), alpha).values
        return hamiltonian(prob, x, v, w, t) - np.einsum("ni,ni->n", w, cd)

    base = lagr(q, u, p)
    worst = 0.0
    for s in s_values:
        moved = lagr(triple.phi1(s, q), triple.phi2(s, u), triple.phi3(s, p))
        worst = max(worst, float(np.max(np.abs(moved - base))))
    return worst


def _rl_right(p: SampledPath, alpha: float) -> np.ndarray:
    # Caputo part plus the boundary term p(b) (b - t)^-alpha / Gamma(1 - alpha);
    # the singular last node takes the cell average of the kernel instead.
    out = rl_right_derivative(p, alpha, caputo=True).values.copy()
    pb = p.values[-1]
    if alpha < 1.0 and np.any(pb != 0.0):
        grid = p.grid
        dist = grid.b - grid.t
        kern = np.empty_like(dist)
        kern[:-1] = dist[:-1] ** (-alpha) / gamma_fn(1.0 - alpha)
        kern[-1] = grid.h ** (-alpha) / gamma_fn(2.0 - alpha)
        out += kern[:, None] * pb[None, :]
    return out


def torres_frederico_residual(g: SampledPath, p: SampledPath, alpha: float) -> SampledPath:
    """Pointwise ``cD^alpha_- g . p - g . D^alpha_+ p`` as a scalar path.

    ``D^alpha_+`` is the right Riemann-Liouville derivative. When
    ``p(b) != 0`` it is singular at ``b`` and the last node holds the cell
    average of the singular term.
    """
    alpha = check_order(alpha)
    _same_grid(g, p)
    cd = caputo_left_derivative(g, alpha).values
    rd = _rl_right(p, alpha)
    vals = np.einsum("ni,ni->n", cd, p.values) - np.einsum("ni,ni->n", g.values, rd)
    return SampledPath(g.grid, vals)


# -- the truncated Noether series ---------------------------------------------


@dataclass(frozen=True)
class SeriesTruncation:
    """Truncation order and the scheme used for the classical derivatives.

    ``polynomial_fit`` differentiates a local least-squares polynomial
    (window ``2r + 3``, degree ``r + 2``) instead of repeating centred
    differences, which damps solver noise in high derivatives.
    """

    r_max: int = 3
    derivative_scheme: str = "finite_difference"

    def __post_init__(self):
        if int(self.r_max) != self.r_max or self.r_max < 0:
            raise ValueError(f"r_max must be a nonnegative integer, got {self.r_max}")
        if self.derivative_scheme not in SCHEMES:
            raise ValueError(f"derivative_scheme must be one of {SCHEMES}")

    def min_intervals(self) -> int:
        return NODES_PER_ORDER * max(1, self.r_max)


@dataclass(frozen=True, eq=False)
class ConservedSeries(SampledPath):
    """Truncated series with its certification data.

    ``certified`` is the half-open node range ``[lo, hi)`` not degraded by
    the one-sided stencils and the kernel singularities at the ends.
    ``terms[r]`` holds the ``r``-th summand, so ``terms[-1]`` is the
    empirical truncation indicator.
    """

    certified: tuple = (0, 0)
    terms: tuple = field(default=(), repr=False)
    r_max: int = 0

    @property
    def last_term_magnitude(self) -> float:
        lo, hi = self.certified
        return float(np.max(np.abs(self.terms[-1][lo:hi]))) if self.terms else 0.0

    def __repr__(self):
        return f"ConservedSeries(grid={self.grid}, r_max={self.r_max}, certified={self.certified})"


def derivative_stride(r: int, h: float) -> int:
    """Node stride for the ``r``-th derivative.

    Balances the ``O((s h)^2)`` truncation error of the centred stencil
    against roundoff amplified like ``eps / (s h)^r``; ``1`` for low orders
    or coarse grids.
    """
    if r <= 1:
        return 1
    return max(1, int(round(_EPS ** (1.0 / (r + 2)) / h)))


def _strided_dt(values: np.ndarray, grid: Grid, passes: int, stride: int) -> np.ndarray:
    # every residue class of nodes is differenced on its own coarser subgrid
    out = np.empty_like(values)
    for off in range(stride):
        sub = values[off::stride]
        for _ in range(passes):
            sub = np.gradient(sub, stride * grid.h, axis=0, edge_order=2)
        out[off::stride] = sub
    return out


def _derivatives(values: np.ndarray, grid: Grid, r_max: int, scheme: str) -> list:
    out = [values]
    if scheme == "finite_difference":
        for r in range(1, r_max + 1):
            stride = derivative_stride(r, grid.h)
            if stride == 1 and r > 1 and derivative_stride(r - 1, grid.h) == 1:
                out.append(_dt(out[-1], grid))
            else:
                out.append(_strided_dt(values, grid, r, stride))
    else:
        for r in range(1, r_max + 1):
            out.append(savgol_filter(values, 2 * r + 3, r + 2, deriv=r, delta=grid.h, axis=0, mode="interp"))
    return out


def _edge(r_max: int, grid: Grid, scheme: str) -> int:
    if scheme == "finite_difference":
        return 2 * r_max * max(derivative_stride(r, grid.h) for r in range(r_max + 1))
    return 2 * r_max


def conserved_quantity(
    g: SampledPath,
    p: SampledPath,
    alpha: float,
    trunc: SeriesTruncation = SeriesTruncation(),
) -> ConservedSeries:
    """Evaluate the Noether series truncated after ``r = trunc.r_max``.

    The summand ``r`` is
    ``(-1)^r I^{r+1-alpha}_-(g - g(a)) . p^(r) + g^(r) . I^{r+1-alpha}_+ p``.
    Its time derivative approximates :func:`torres_frederico_residual`, so
    along a symmetric solution the series is nearly constant.

    Raises
    ------
    ResolutionError
        ``r_max > 6`` or fewer than ``64 max(1, r_max)`` intervals.
    """
    alpha = check_order(alpha)
    _same_grid(g, p)
    grid = g.grid
    r_max = trunc.r_max
    if r_max > MAX_R:
        raise ResolutionError(f"r_max = {r_max} exceeds the supported maximum {MAX_R}")
    if grid.n < trunc.min_intervals():
        raise ResolutionError(
            f"r_max = {r_max} needs n >= {trunc.min_intervals()} intervals, got n = {grid.n}"
        )
    gv, pv = g.values, p.values
    shifted = gv - gv[0]
    dp = _derivatives(pv, grid, r_max, trunc.derivative_scheme)
    dg = _derivatives(gv, grid, r_max, trunc.derivative_scheme)
    terms = []
    for r in range(r_max + 1):
        order = r + 1.0 - alpha
        left = _left_integral_values(shifted, grid, order)
        right = _right_integral_values(pv, grid, order)
        term = (-1.0) ** r * np.einsum("ni,ni->n", left, dp[r]) + np.einsum("ni,ni->n", dg[r], right)
        term.flags.writeable = False
        terms.append(term)
    # fixed summation order keeps outputs bit-reproducible
    vals = np.zeros(len(grid))
    for term in terms:
        vals = vals + term
    edge = _edge(r_max, grid, trunc.derivative_scheme)
    if len(grid) - 2 * edge < 2:
        raise ResolutionError(f"no certified interior left for r_max = {r_max} on n = {grid.n}")
    return ConservedSeries(grid, vals, certified=(edge, len(grid) - edge), terms=tuple(terms), r_max=r_max)


def drift_report(series: SampledPath, exclude: int = 0) -> dict:
    """Spread of a nominally constant scalar path over its certified interior.

    For a :class:`ConservedSeries` the certified range is its own; for a
    plain path ``exclude`` nodes are dropped at each end. ``rel_drift`` is
    ``spread / (|mean| + tiny)``.
    """
    if series.dim != 1:
        raise ValueError("drift_report needs a scalar path")
    if isinstance(series, ConservedSeries):
        lo, hi = series.certified
        last = series.last_term_magnitude
    else:
        if exclude < 0:
            raise ValueError("exclude must be nonnegative")
        lo, hi = exclude, len(series.grid) - exclude
        last = None
    if hi <= lo:
        raise ResolutionError("the certified interior is empty")
    vals = series.values[lo:hi, 0]
    spread = float(vals.max() - vals.min())
    mean = float(np.mean(vals))
    t = series.grid.t
    return {
        "spread": spread,
        "rel_drift": spread / (abs(mean) + np.finfo(float).tiny),
        "certified_range": [float(t[lo]), float(t[hi - 1])],
        "last_term_magnitude": last,
    }
