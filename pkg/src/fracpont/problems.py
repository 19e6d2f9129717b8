"""Built-in control problems and their closed-form reference solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from .ocp import ControlProblem
from .special import gamma_fn, mittag_leffler

__all__ = [
    "PROBLEM_TAGS",
    "SolvedExampleParams",
    "InvalidParameterError",
    "build",
    "classical_lq_reference",
    "solved_fractional_reference",
    "solved_fractional_adjoint",
]

PROBLEM_TAGS = (
    "classical_lq",
    "fractional_lq_1d",
    "fractional_lq_2d_rot",
    "solved_fractional",
    "euler_lagrange_demo",
    "custom",
)


class InvalidParameterError(ValueError):
    pass


@dataclass(frozen=True)
class SolvedExampleParams:
    """Parameters of the solved fractional example.

    ``beta``, ``gamma``, ``mu`` and ``lam`` must be nonzero. ``beta`` must
    also be positive here, since the Lagrangian is sampled at ``t = 1``.
    """

    alpha: float = 0.5
    beta: float = 1.0
    gamma: float = 1.0
    mu: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise InvalidParameterError(f"alpha must lie in (0, 1], got {self.alpha}")
        for name in ("beta", "gamma", "mu", "lam"):
            value = getattr(self, name)
            if value == 0 or not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be a nonzero real, got {value}")
        if self.beta < 0:
            raise InvalidParameterError(f"beta must be positive on a closed grid, got {self.beta}")


def _rows(n):
    return np.zeros((n, 1, 1))


# -- quadratic Lagrangian, f = x + v in any dimension -------------------------


def _lq(dim: int, alpha: float, A, a: float, b: float, name: str, drift=None) -> ControlProblem:
    # f = B x + v with B = I unless a drift matrix is given
    eye = np.eye(dim)
    B = eye if drift is None else np.asarray(drift, dtype=float)

    def L(x, v, t):
        return 0.5 * (np.sum(x * x, axis=1) + np.sum(v * v, axis=1))

    def f(x, v, t):
        return x @ B.T + v

    def jac(x, v, t):
        return np.broadcast_to(eye, (len(x), dim, dim))

    def jac_x(x, v, t):
        return np.broadcast_to(B, (len(x), dim, dim))

    return ControlProblem(
        d=dim,
        m=dim,
        a=a,
        b=b,
        alpha=alpha,
        initial=np.asarray(A, dtype=float).reshape(dim),
        L=L,
        dLdx=lambda x, v, t: np.array(x, dtype=float),
        dLdv=lambda x, v, t: np.array(v, dtype=float),
        f=f,
        dfdx=jac_x,
        dfdv=jac,
        lipschitz=float(np.linalg.norm(B, 2)),
        name=name,
    )


def _classical_lq(A=1.0, a=0.0, b=1.0, alpha=1.0):
    return _lq(1, alpha, A, a, b, "classical_lq")


def _fractional_lq_1d(A=1.0, a=0.0, b=1.0, alpha=0.5):
    return _lq(1, alpha, A, a, b, "fractional_lq_1d")


def _fractional_lq_2d_rot(A=(1.0, 0.5), a=0.0, b=1.0, alpha=0.6, omega=0.0):
    # omega couples the two axes through a scaled rotation, which commutes
    # with every planar rotation and so keeps the rotational symmetry; with
    # omega = 0 both components share one scalar equation and q, p stay
    # parallel to A
    omega = float(omega)
    if not math.isfinite(omega):
        raise InvalidParameterError("omega must be finite")
    drift = [[1.0, -omega], [omega, 1.0]]
    return _lq(2, alpha, A, a, b, "fractional_lq_2d_rot", drift=drift)


def _solved_fractional(A=1.0, alpha=0.5, beta=1.0, gamma=1.0, mu=1.0, lam=1.0):
    prm = SolvedExampleParams(alpha, beta, gamma, mu, lam)

    def L(x, v, t):
        return 0.5 * v[:, 0] ** 2 + prm.gamma * (1.0 - t) ** prm.beta * x[:, 0]

    def dLdx(x, v, t):
        return (prm.gamma * (1.0 - t) ** prm.beta)[:, None] * np.ones_like(x)

    def f(x, v, t):
        return prm.lam * x + prm.mu * v

    return ControlProblem(
        d=1,
        m=1,
        a=0.0,
        b=1.0,
        alpha=prm.alpha,
        initial=[A],
        L=L,
        dLdx=dLdx,
        dLdv=lambda x, v, t: np.array(v, dtype=float),
        f=f,
        dfdx=lambda x, v, t: _rows(len(x)) + prm.lam,
        dfdv=lambda x, v, t: _rows(len(x)) + prm.mu,
        lipschitz=abs(prm.lam),
        name="solved_fractional",
    )


def _euler_lagrange_demo(A=1.0, a=0.0, b=1.0, alpha=0.5):
    # f = v turns the state equation into cD q = u
    return ControlProblem(
        d=1,
        m=1,
        a=a,
        b=b,
        alpha=alpha,
        initial=[A],
        L=lambda x, v, t: 0.5 * (v[:, 0] ** 2 + x[:, 0] ** 2),
        dLdx=lambda x, v, t: np.array(x, dtype=float),
        dLdv=lambda x, v, t: np.array(v, dtype=float),
        f=lambda x, v, t: np.array(v, dtype=float),
        dfdx=lambda x, v, t: _rows(len(x)),
        dfdv=lambda x, v, t: _rows(len(x)) + 1.0,
        lipschitz=0.0,
        name="euler_lagrange_demo",
    )


_BUILDERS: Dict[str, Callable[..., ControlProblem]] = {
    "classical_lq": _classical_lq,
    "fractional_lq_1d": _fractional_lq_1d,
    "fractional_lq_2d_rot": _fractional_lq_2d_rot,
    "solved_fractional": _solved_fractional,
    "euler_lagrange_demo": _euler_lagrange_demo,
}


def build(tag: str, problem: ControlProblem | None = None, **params) -> ControlProblem:
    """Build and validate a registered problem.

    Keyword parameters override the defaults of each tag (``A``, ``a``,
    ``b``, ``alpha``; ``beta``, ``gamma``, ``mu``, ``lam`` for
    ``solved_fractional``; ``omega`` for ``fractional_lq_2d_rot``). ``custom`` takes a ready ``problem`` and only
    validates it.
    """
    if tag == "custom":
        if problem is None:
            raise InvalidParameterError("custom problems need a ControlProblem payload")
        prob = problem
    else:
        try:
            builder = _BUILDERS[tag]
        except KeyError:
            raise InvalidParameterError(f"unknown problem tag {tag!r}; expected one of {PROBLEM_TAGS}")
        try:
            prob = builder(**params)
        except TypeError as exc:
            raise InvalidParameterError(f"bad parameters for {tag}: {exc}") from None
    prob.validate()
    return prob


# -- closed forms -------------------------------------------------------------


def classical_lq_reference(A: float, a: float, b: float, t) -> tuple:
    """Optimal ``(q(t), u(t))`` of the classical LQ problem (``alpha = 1``)."""
    t_arr = np.asarray(t, dtype=float)
    if not a < b:
        raise ValueError("need a < b")
    if np.any(t_arr < a) or np.any(t_arr > b):
        raise ValueError(f"t must lie in [{a}, {b}]")
    r2 = math.sqrt(2.0)
    L = r2 * (b - a)
    R = math.sinh(L) / (r2 * math.cosh(L) - math.sinh(L))
    s = r2 * (t_arr - a)
    q = A * (np.cosh(s) + (1.0 - R) / r2 * np.sinh(s))
    u = A * ((1.0 + R) / r2 * np.sinh(s) - R * np.cosh(s))
    if np.ndim(t) == 0:
        return float(q), float(u)
    return q, u


def _check_unit(t):
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > 1):
        raise ValueError("t must lie in [0, 1]")
    return t_arr


def solved_fractional_adjoint(prm: SolvedExampleParams, t):
    """Adjoint ``gamma Gamma(beta+1) (1-t)^(alpha+beta) E_{alpha,alpha+beta+1}(lam (1-t)^alpha)``."""
    t_arr = _check_unit(t)
    s = 1.0 - t_arr
    a2 = prm.alpha + prm.beta + 1.0
    ml = np.array([mittag_leffler(prm.alpha, a2, prm.lam * x**prm.alpha) for x in np.ravel(s)])
    p = prm.gamma * gamma_fn(prm.beta + 1.0) * np.ravel(s) ** (prm.alpha + prm.beta) * ml
    p = p.reshape(s.shape)
    return float(p) if np.ndim(t) == 0 else p


def solved_fractional_reference(prm: SolvedExampleParams, t):
    """Unique critical control ``u = -mu p`` of the solved fractional example."""
    p = solved_fractional_adjoint(prm, t)
    return -prm.mu * p
