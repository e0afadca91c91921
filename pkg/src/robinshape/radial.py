"""High-accuracy first eigenvalue of the Robin p-Laplacian on n-balls.

The first eigenfunction on a ball is radial, so the PDE reduces to the
singular ODE

    (r^{n-1} |u'|^{p-2} u')' + lam r^{n-1} |u|^{p-2} u = 0,
    u'(0) = 0,   |u'|^{p-2} u'(R) + beta |u|^{p-2} u(R) = 0,

integrated in the flux variable w = |u'|^{p-2} u' (which stays C^1 through
zeros of u') by an adaptive 4th/5th-order pair, with bisection on lam.
This module is the trusted oracle against which the FEM path is checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.special import gamma

from .errors import BracketError, ConvergenceError

INF = math.inf

ORIGIN_FRACTION = 1e-8     # integration starts at r0 = ORIGIN_FRACTION * R
IVP_RTOL = 1e-11
IVP_ATOL = 1e-13
LAMBDA_RTOL = 1e-10
PROFILE_POINTS = 2001


def unit_sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n (2 pi for n = 2)."""
    return 2.0 * math.pi ** (n / 2.0) / gamma(n / 2.0)


def ball_volume(n: int, radius: float) -> float:
    return unit_sphere_area(n) * radius**n / n


@dataclass(frozen=True)
class Ball:
    """Ball domain marker used by the validation sweeps."""

    n: int = 2
    radius: float = 1.0


@dataclass(frozen=True)
class RadialSolution:
    n: int
    radius: float
    p: float
    beta: float
    lambda1: float
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    diagnostics: dict = field(compare=False, default_factory=dict)

    def spline(self):
        return CubicSpline(self.r, self.u), CubicSpline(self.r, self.du)


def _rhs(n: int, p: float, lam: float):
    q = 1.0 / (p - 1.0)

    def rhs(r, y):
        u, w = y
        du = math.copysign(abs(w) ** q, w) if w != 0.0 else 0.0
        dw = -(n - 1) / r * w - lam * abs(u) ** (p - 2.0) * u
        return (du, dw)

    return rhs


def _shoot(n: int, radius: float, p: float, lam: float, dense: bool = False):
    """Integrate from the origin; returns (u(R), w(R), crossed, sol)."""
    r0 = ORIGIN_FRACTION * radius

    def hit_zero(r, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1.0

    sol = solve_ivp(
        _rhs(n, p, lam),
        (r0, radius),
        (1.0, 0.0),
        method="RK45",
        rtol=IVP_RTOL,
        atol=IVP_ATOL,
        events=hit_zero,
        dense_output=dense,
    )
    if not sol.success:
        raise ConvergenceError(f"ODE integration failed: {sol.message}")
    crossed = sol.status == 1
    u_end, w_end = sol.y[0, -1], sol.y[1, -1]
    return u_end, w_end, crossed, sol


def _robin_indicator(n, radius, p, beta, lam) -> float:
    """Positive below lambda_1, negative above (interior zero counts as past)."""
    u_end, w_end, crossed, _ = _shoot(n, radius, p, lam)
    if crossed:
        return -1.0
    if beta == INF:
        return u_end
    return w_end + beta * abs(u_end) ** (p - 2.0) * u_end


def _bracket_upper(n, radius, p, beta) -> float:
    """Scan doubling lambdas until the indicator goes negative."""
    lam = 0.5 / radius**p
    for _ in range(60):
        if _robin_indicator(n, radius, p, beta, lam) <= 0.0:
            return lam
        lam *= 2.0
    raise BracketError(
        f"no sign change up to lambda={lam:g} for n={n} R={radius} p={p} beta={beta}"
    )


def solve_ball(n: int, radius: float, p: float, beta: float) -> RadialSolution:
    """First eigenvalue and radial profile on B(0, radius) in R^n.

    ``beta`` may be ``math.inf`` for the Dirichlet problem; ``beta = 0``
    returns the Neumann pair (0, constant).  The profile is normalized so
    that the p-integral of |u| over the ball is 1.
    """
    if n < 2:
        raise ValueError("dimension n must be >= 2")
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    if beta != INF and beta < 0.0:
        raise ValueError("beta must be nonnegative or infinity")

    r = np.linspace(ORIGIN_FRACTION * radius, radius, PROFILE_POINTS)
    if beta == 0.0:
        c = ball_volume(n, radius) ** (-1.0 / p)
        return RadialSolution(
            n, radius, p, 0.0, 0.0, r, np.full_like(r, c), np.zeros_like(r),
            diagnostics={"bisections": 0, "bracket": (0.0, 0.0)},
        )

    hi = _bracket_upper(n, radius, p, beta)
    lo = hi / 2.0 if hi > 1e-8 else 0.0
    while lo > 1e-12 and _robin_indicator(n, radius, p, beta, lo) <= 0.0:
        hi = lo
        lo /= 2.0
    iterations = 0
    while hi - lo > LAMBDA_RTOL * hi:
        iterations += 1
        if iterations > 200:
            raise ConvergenceError(
                "lambda bisection failed to converge",
                diagnostics={"lo": lo, "hi": hi},
            )
        mid = 0.5 * (lo + hi)
        if _robin_indicator(n, radius, p, beta, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)

    _, _, crossed, sol = _shoot(n, radius, p, lam, dense=True)
    if crossed:
        # At the converged lambda the profile grazes zero only at r = R.
        _, _, crossed, sol = _shoot(n, radius, p, lo, dense=True)
        if crossed:
            raise ConvergenceError("first-eigenvalue profile crosses zero")
    y = sol.sol(r)
    u = y[0]
    w = y[1]
    q = 1.0 / (p - 1.0)
    du = np.sign(w) * np.abs(w) ** q
    norm_p = unit_sphere_area(n) * np.trapezoid(np.abs(u) ** p * r ** (n - 1), r)
    c = norm_p ** (-1.0 / p)
    return RadialSolution(
        n,
        radius,
        p,
        beta,
        lam,
        r,
        c * u,
        c * du,
        diagnostics={
            "bisections": iterations,
            "bracket": (lo, hi),
            "normalization": norm_p,
        },
    )


def evaluate(solution: RadialSolution, r) -> tuple:
    """(u, u') at radius r by cubic interpolation of the stored grid."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0.0) or np.any(r > solution.radius * (1 + 1e-12)):
        raise ValueError("radius outside [0, R]")
    su, sdu = solution.spline()
    rr = np.clip(r, solution.r[0], solution.r[-1])
    return su(rr), sdu(rr)


def boundary_identity_residual(solution: RadialSolution) -> float:
    """Relative defect of |u'(R)| = beta^{1/(p-1)} |u(R)| (finite beta)."""
    if solution.beta in (0.0, INF):
        return 0.0
    lhs = abs(solution.du[-1])
    rhs = solution.beta ** (1.0 / (solution.p - 1.0)) * abs(solution.u[-1])
    return abs(lhs - rhs) / max(abs(rhs), 1e-300)


def dirichlet_lambda(n: int, radius: float, p: float) -> float:
    return solve_ball(n, radius, p, INF).lambda1


def lambda_rate_of_radius(
    n: int, radius: float, p: float, beta: float, step: float = 1e-4
) -> float:
    """Central difference of lambda_1 with respect to the ball radius."""
    lp = solve_ball(n, radius + step, p, beta).lambda1
    lm = solve_ball(n, radius - step, p, beta).lambda1
    return (lp - lm) / (2.0 * step)
