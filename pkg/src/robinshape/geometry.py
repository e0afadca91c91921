"""Differential geometry of star-shaped boundary curves.

A boundary is the polar graph ``rho(theta)`` about a fixed center, with
``rho`` a real trigonometric polynomial.  All frames (tangent, outward
normal, curvature, arclength density) come from closed-form derivatives
of ``rho``; nothing here is numerically differentiated.  Boundary
integrals use composite Gauss-Legendre quadrature in ``theta`` with the
arclength jacobian.

Conventions (planar case n = 2): the curve is traversed counterclockwise,
the normal points outward, the signed curvature of a circle of radius R
is ``1/R``, and the mean curvature H equals the signed curvature, so that
``(n-1) * H`` is the planar curvature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegreeTooLowError,
    InvalidCurveError,
    PerturbationTooLargeError,
)

TWO_PI = 2.0 * np.pi

STAR_CHECK_SAMPLES = 4096
DEFAULT_QUAD_NODES = 512
FIT_SAMPLES = 2048
FIT_RESIDUAL_TOL = 1e-10
# Normal offsets of trig-polynomial curves are analytic but not polynomial;
# their coefficients decay geometrically (about x30 per 8 modes for the
# rho = 1 + 0.3 cos 2t reference), so degree 48 holds the 1e-10 fit budget
# for perturbation sizes through t ~ 0.05.
MIN_FIT_DEGREE = 48


def _trig_eval(a: np.ndarray, b: np.ndarray, theta, order: int = 0):
    """Evaluate d^order/dtheta^order of a0 + sum_k a_k cos + b_k sin."""
    theta = np.asarray(theta, dtype=float)
    k = np.arange(a.size, dtype=float)
    kt = theta[..., None] * k
    shift = 0.5 * np.pi * order
    kp = k**order  # 0**0 == 1 keeps the constant term at order 0
    return np.sum(a * kp * np.cos(kt + shift) + b * kp * np.sin(kt + shift), axis=-1)


class PeriodicInterpolant:
    """Trigonometric interpolation of 2pi-periodic samples on a uniform grid.

    Exact (to round-off) whenever the sampled function is itself a trig
    polynomial resolved by the grid; derivatives are closed-form.
    """

    def __init__(self, values: Sequence[float]):
        v = np.asarray(values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("need a 1-D array of at least 2 samples")
        n = v.size
        c = np.fft.rfft(v) / n
        a = 2.0 * c.real
        b = -2.0 * c.imag
        a[0] = c[0].real
        b[0] = 0.0
        if n % 2 == 0:
            a[-1] *= 0.5  # Nyquist cosine appears once in the inverse transform
            b[-1] = 0.0
        self.a = a
        self.b = b

    def __call__(self, theta, order: int = 0):
        return _trig_eval(self.a, self.b, theta, order)


def _as_boundary_scalar(f) -> PeriodicInterpolant | Callable:
    """Normalize a boundary scalar field given as callable or uniform samples."""
    if callable(f):
        return f
    return PeriodicInterpolant(f)


def _scalar_dtheta(f, theta, dfdtheta=None):
    if dfdtheta is not None:
        return np.asarray(dfdtheta(theta), dtype=float)
    if isinstance(f, PeriodicInterpolant):
        return f(theta, order=1)
    interp = PeriodicInterpolant(f(np.linspace(0.0, TWO_PI, 1024, endpoint=False)))
    return interp(theta, order=1)


@dataclass(frozen=True)
class BoundaryCurve:
    """Star-shaped boundary rho(theta) = a0 + sum_k (a_k cos k t + b_k sin k t).

    ``coefficients`` is the flat layout [a0, a1, b1, a2, b2, ...].
    Positivity of rho is checked on a dense grid at construction.
    """

    coefficients: np.ndarray
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))
    fit_residual: float = field(default=0.0, compare=False)

    def __post_init__(self):
        coef = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        if coef.ndim != 1 or coef.size % 2 == 0:
            raise InvalidCurveError(
                "coefficients must be a flat odd-length array [a0, a1, b1, ...]"
            )
        center = np.asarray(self.center, dtype=float).reshape(2)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "center", center)
        d = (coef.size - 1) // 2
        a = np.zeros(d + 1)
        b = np.zeros(d + 1)
        a[0] = coef[0]
        if d:
            a[1:] = coef[1::2]
            b[1:] = coef[2::2]
        object.__setattr__(self, "_a", a)
        object.__setattr__(self, "_b", b)
        grid = np.linspace(0.0, TWO_PI, STAR_CHECK_SAMPLES, endpoint=False)
        rho = self.radius(grid)
        if not np.all(rho > 0.0):
            raise InvalidCurveError(
                f"rho(theta) must be positive; min sampled value {rho.min():.3e}"
            )

    @classmethod
    def circle(cls, radius: float, center=(0.0, 0.0)) -> "BoundaryCurve":
        return cls(np.array([float(radius)]), np.asarray(center, dtype=float))

    @property
    def degree(self) -> int:
        return (self.coefficients.size - 1) // 2

    def radius(self, theta, order: int = 0):
        """rho(theta) or its order-th closed-form derivative."""
        return _trig_eval(self._a, self._b, theta, order)

    def point(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        rho = self.radius(theta)
        return self.center + rho[..., None] * np.stack(
            [np.cos(theta), np.sin(theta)], axis=-1
        )

    def scale(self) -> float:
        """Characteristic length: max of rho over the check grid."""
        grid = np.linspace(0.0, TWO_PI, STAR_CHECK_SAMPLES, endpoint=False)
        return float(self.radius(grid).max())


@dataclass(frozen=True)
class BoundaryFrame:
    """Pointwise boundary frame; all fields broadcast with the input theta."""

    theta: np.ndarray
    point: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    curvature: np.ndarray
    mean_curvature: np.ndarray
    arclength_density: np.ndarray


def boundary_frame(curve: BoundaryCurve, theta) -> BoundaryFrame:
    """Frame of the curve at theta (scalar or array).

    Tangent follows increasing theta (counterclockwise), normal is the
    outward rotation of the tangent, curvature is the standard polar-graph
    expression in rho, rho', rho''.
    """
    theta = np.asarray(theta, dtype=float)
    rho = curve.radius(theta)
    if np.any(rho <= 0.0):
        raise InvalidCurveError("rho(theta) <= 0 at a requested angle")
    d1 = curve.radius(theta, 1)
    d2 = curve.radius(theta, 2)
    ct, st = np.cos(theta), np.sin(theta)
    er = np.stack([ct, st], axis=-1)
    et = np.stack([-st, ct], axis=-1)
    xt = d1[..., None] * er + rho[..., None] * et
    speed = np.sqrt(rho**2 + d1**2)
    tangent = xt / speed[..., None]
    normal = np.stack([tangent[..., 1], -tangent[..., 0]], axis=-1)
    curvature = (rho**2 + 2.0 * d1**2 - rho * d2) / speed**3
    return BoundaryFrame(
        theta=theta,
        point=curve.center + rho[..., None] * er,
        tangent=tangent,
        normal=normal,
        curvature=curvature,
        mean_curvature=curvature,  # H = kappa / (n - 1) with n = 2
        arclength_density=speed,
    )


# ---------------------------------------------------------------------------
# Perturbation vector fields
# ---------------------------------------------------------------------------


class VectorField:
    """Perturbation field restricted to a boundary curve.

    Subclasses provide boundary values and their closed-form theta
    derivative along the curve; that is all the tangential calculus needs.
    """

    def boundary_values(self, curve: BoundaryCurve, theta) -> np.ndarray:
        raise NotImplementedError

    def boundary_dtheta(self, curve: BoundaryCurve, theta) -> np.ndarray:
        raise NotImplementedError

    def __add__(self, other: "VectorField") -> "VectorField":
        return SumField(self, other)

    def __mul__(self, scalar: float) -> "VectorField":
        return ScaledField(self, float(scalar))

    __rmul__ = __mul__


class ConstantField(VectorField):
    """Uniform translation field v(x) = c."""

    def __init__(self, vector):
        self.vector = np.asarray(vector, dtype=float).reshape(2)

    def boundary_values(self, curve, theta):
        theta = np.asarray(theta, dtype=float)
        return np.broadcast_to(self.vector, theta.shape + (2,)).copy()

    def boundary_dtheta(self, curve, theta):
        theta = np.asarray(theta, dtype=float)
        return np.zeros(theta.shape + (2,))


class RotationField(VectorField):
    """Rigid rotation v(x) = omega * (x - pivot)^perp."""

    def __init__(self, pivot=(0.0, 0.0), omega: float = 1.0):
        self.pivot = np.asarray(pivot, dtype=float).reshape(2)
        self.omega = float(omega)

    @staticmethod
    def _perp(w):
        return np.stack([-w[..., 1], w[..., 0]], axis=-1)

    def boundary_values(self, curve, theta):
        x = curve.point(theta)
        return self.omega * self._perp(x - self.pivot)

    def boundary_dtheta(self, curve, theta):
        frame = boundary_frame(curve, theta)
        xt = frame.tangent * frame.arclength_density[..., None]
        return self.omega * self._perp(xt)


class NormalField(VectorField):
    """Normal perturbation v = g(theta) * eta(theta).

    ``profile`` may be a number (constant g), a callable of theta, or a
    uniform sample array (trig-interpolated).  An analytic derivative can
    be supplied; otherwise it is obtained spectrally.
    """

    def __init__(self, profile, profile_dtheta=None):
        self.constant_value = None
        if np.isscalar(profile):
            self.constant_value = float(profile)
            self._g = lambda t: np.full(np.shape(np.asarray(t)), float(profile))
            self._dg = lambda t: np.zeros(np.shape(np.asarray(t)))
        else:
            f = _as_boundary_scalar(profile)
            self._g = lambda t: np.asarray(f(t), dtype=float)
            if profile_dtheta is not None:
                self._dg = lambda t: np.asarray(profile_dtheta(t), dtype=float)
            else:
                self._dg = lambda t: _scalar_dtheta(f, t)

    def profile(self, theta):
        return self._g(np.asarray(theta, dtype=float))

    def boundary_values(self, curve, theta):
        frame = boundary_frame(curve, theta)
        return self._g(frame.theta)[..., None] * frame.normal

    def boundary_dtheta(self, curve, theta):
        frame = boundary_frame(curve, theta)
        g = self._g(frame.theta)[..., None]
        dg = self._dg(frame.theta)[..., None]
        # d eta / d theta = kappa * |x_theta| * tau
        deta = (frame.curvature * frame.arclength_density)[..., None] * frame.tangent
        return dg * frame.normal + g * deta


class TabulatedField(VectorField):
    """Componentwise periodic interpolation of boundary samples v(theta_j).

    Samples must sit on the uniform grid theta_j = 2 pi j / N.
    """

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[1] != 2:
            raise ValueError("expected samples of shape (N, 2)")
        self._vx = PeriodicInterpolant(values[:, 0])
        self._vy = PeriodicInterpolant(values[:, 1])

    def boundary_values(self, curve, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack([self._vx(theta), self._vy(theta)], axis=-1)

    def boundary_dtheta(self, curve, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack([self._vx(theta, 1), self._vy(theta, 1)], axis=-1)


class SumField(VectorField):
    def __init__(self, first: VectorField, second: VectorField):
        self.first = first
        self.second = second

    def boundary_values(self, curve, theta):
        return self.first.boundary_values(curve, theta) + self.second.boundary_values(
            curve, theta
        )

    def boundary_dtheta(self, curve, theta):
        return self.first.boundary_dtheta(curve, theta) + self.second.boundary_dtheta(
            curve, theta
        )


class ScaledField(VectorField):
    def __init__(self, base: VectorField, factor: float):
        self.base = base
        self.factor = factor

    def boundary_values(self, curve, theta):
        return self.factor * self.base.boundary_values(curve, theta)

    def boundary_dtheta(self, curve, theta):
        return self.factor * self.base.boundary_dtheta(curve, theta)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


def composite_gauss_legendre(n_nodes: int, panel_size: int = 8):
    """Composite Gauss-Legendre nodes/weights on [0, 2pi).

    ``n_nodes`` must be a multiple of ``panel_size``; weights sum to 2pi.
    """
    if n_nodes % panel_size:
        raise ValueError("n_nodes must be a multiple of panel_size")
    panels = n_nodes // panel_size
    x, w = np.polynomial.legendre.leggauss(panel_size)
    width = TWO_PI / panels
    starts = width * np.arange(panels)
    theta = (starts[:, None] + 0.5 * width * (x + 1.0)).ravel()
    weights = np.tile(0.5 * width * w, panels)
    return theta, weights


def boundary_quadrature(curve: BoundaryCurve, n_nodes: int = DEFAULT_QUAD_NODES):
    """Quadrature (theta_i, w_i) with w_i including the arclength jacobian."""
    theta, w = composite_gauss_legendre(n_nodes)
    speed = boundary_frame(curve, theta).arclength_density
    return theta, w * speed


def total_length(curve: BoundaryCurve, n_nodes: int = DEFAULT_QUAD_NODES) -> float:
    _, w = boundary_quadrature(curve, n_nodes)
    return float(w.sum())


def arclength_between(curve: BoundaryCurve, theta_a: float, theta_b: float) -> float:
    """Exact-arclength integral of |x_theta| on [theta_a, theta_b], GL-16."""
    x, w = np.polynomial.legendre.leggauss(16)
    mid = 0.5 * (theta_a + theta_b)
    half = 0.5 * (theta_b - theta_a)
    t = mid + half * x
    speed = boundary_frame(curve, t).arclength_density
    return float(half * np.dot(w, speed))


# ---------------------------------------------------------------------------
# Tangential calculus (curve case of the surface operators)
# ---------------------------------------------------------------------------


def tangential_divergence(v: VectorField, curve: BoundaryCurve, theta):
    """Surface divergence of v on the curve: g^{11} v_theta . x_theta."""
    frame = boundary_frame(curve, theta)
    vth = v.boundary_dtheta(curve, theta)
    xt = frame.tangent * frame.arclength_density[..., None]
    return np.sum(vth * xt, axis=-1) / frame.arclength_density**2


def tangential_gradient(f, curve: BoundaryCurve, theta, dfdtheta=None) -> np.ndarray:
    """Tangential gradient of a boundary scalar field.

    ``f`` is a callable of theta or a uniform sample array.  The result is
    tangent to the curve with magnitude df/ds.
    """
    f = _as_boundary_scalar(f)
    frame = boundary_frame(curve, theta)
    ft = _scalar_dtheta(f, frame.theta, dfdtheta)
    return (ft / frame.arclength_density)[..., None] * frame.tangent


def surface_element_rate(curve: BoundaryCurve, v: VectorField, theta):
    """First-order rate of the boundary area element under x + t v.

    Computed from the decomposition div_tau(v^tau) + (n-1) H (v . eta),
    using d(v . tau)/ds for the tangential part.
    """
    frame = boundary_frame(curve, theta)
    vb = v.boundary_values(curve, theta)
    vth = v.boundary_dtheta(curve, theta)
    speed = frame.arclength_density
    # d tau / d theta = -kappa |x_theta| eta
    dtau = -(frame.curvature * speed)[..., None] * frame.normal
    dvtau_ds = (np.sum(vth * frame.tangent, axis=-1) + np.sum(vb * dtau, axis=-1)) / speed
    v_n = np.sum(vb * frame.normal, axis=-1)
    return dvtau_ds + frame.curvature * v_n


def surface_gauss_residual(
    curve: BoundaryCurve,
    f,
    v: VectorField,
    n_nodes: int = DEFAULT_QUAD_NODES,
    dfdtheta=None,
) -> float:
    """Defect of the surface Gauss theorem for (f, v) on the curve.

    Returns  int f div_tau v ds + int v . grad_tau f ds
             - (n-1) int f (v . eta) H ds,
    which vanishes for smooth data up to quadrature error.
    """
    theta, w = boundary_quadrature(curve, n_nodes)
    frame = boundary_frame(curve, theta)
    f = _as_boundary_scalar(f)
    fv = np.asarray(f(theta), dtype=float)
    div_v = tangential_divergence(v, curve, theta)
    grad_f = tangential_gradient(f, curve, theta, dfdtheta)
    vb = v.boundary_values(curve, theta)
    v_n = np.sum(vb * frame.normal, axis=-1)
    term1 = np.dot(w, fv * div_v)
    term2 = np.dot(w, np.sum(vb * grad_f, axis=-1))
    term3 = np.dot(w, fv * v_n * frame.mean_curvature)
    return float(term1 + term2 - term3)


# ---------------------------------------------------------------------------
# Domain perturbation
# ---------------------------------------------------------------------------


def perturb_curve(
    curve: BoundaryCurve,
    v: VectorField,
    t: float,
    fit_degree: int | None = None,
    n_samples: int = FIT_SAMPLES,
    residual_tol: float = FIT_RESIDUAL_TOL,
) -> BoundaryCurve:
    """Image of the boundary under x -> x + t v(x), refit as a trig polynomial.

    The moved points are converted back to polar form about the original
    center and least-squares fitted on a fixed dense grid.  The max-norm
    fit residual (relative to curve scale) is stored on the result.

    Raises PerturbationTooLargeError if the moved curve stops being a
    star-shaped graph over theta, DegreeTooLowError if the fit residual
    exceeds ``residual_tol`` times the curve scale.
    """
    if fit_degree is None:
        fit_degree = max(curve.degree, MIN_FIT_DEGREE)
    theta = np.linspace(0.0, TWO_PI, n_samples, endpoint=False)
    moved = curve.point(theta) + t * v.boundary_values(curve, theta)
    rel = moved - curve.center
    rad = np.hypot(rel[:, 0], rel[:, 1])
    if np.any(rad <= 0.0):
        raise PerturbationTooLargeError("moved boundary passes through the center")
    ang = np.unwrap(np.arctan2(rel[:, 1], rel[:, 0]))
    if np.any(np.diff(ang) <= 0.0) or not np.isclose(ang[-1] - ang[0], TWO_PI, rtol=0.02):
        raise PerturbationTooLargeError(
            "moved boundary is not a graph over theta (star-shapedness lost)"
        )
    k = np.arange(1, fit_degree + 1)
    design = np.empty((n_samples, 2 * fit_degree + 1))
    design[:, 0] = 1.0
    design[:, 1::2] = np.cos(ang[:, None] * k)
    design[:, 2::2] = np.sin(ang[:, None] * k)
    coef, *_ = np.linalg.lstsq(design, rad, rcond=None)
    scale = float(rad.max())
    residual = float(np.abs(design @ coef - rad).max()) / scale
    if residual > residual_tol:
        raise DegreeTooLowError(
            f"fit residual {residual:.3e} exceeds {residual_tol:.1e}; "
            f"increase fit_degree (currently {fit_degree})"
        )
    return BoundaryCurve(coef, curve.center.copy(), fit_residual=residual)


def area(curve: BoundaryCurve) -> float:
    """Exact enclosed area of the polar graph: 1/2 int rho^2 dtheta."""
    a, b = curve._a, curve._b
    return float(np.pi * a[0] ** 2 + 0.5 * np.pi * (np.sum(a[1:] ** 2) + np.sum(b[1:] ** 2)))


def volume_and_rate(
    curve: BoundaryCurve, v: VectorField, n_nodes: int = DEFAULT_QUAD_NODES
):
    """(enclosed area, first-order area rate int v . eta ds) for the field v."""
    theta, w = boundary_quadrature(curve, n_nodes)
    frame = boundary_frame(curve, theta)
    v_n = np.sum(v.boundary_values(curve, theta) * frame.normal, axis=-1)
    return area(curve), float(np.dot(w, v_n))


def curve_distance(first: BoundaryCurve, second: BoundaryCurve, n_samples: int = 1024) -> float:
    """Max radial gap between two curves sharing a center."""
    theta = np.linspace(0.0, TWO_PI, n_samples, endpoint=False)
    return float(np.abs(first.radius(theta) - second.radius(theta)).max())
