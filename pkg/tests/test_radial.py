import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import j0, j1, jn_zeros

from robinshape import radial
from robinshape.errors import BracketError  # noqa: F401 - part of the public contract


def bessel_robin_lambda(beta: float) -> float:
    """Oracle for the p=2 unit disk: lambda = x*^2, x J1(x) = beta J0(x)."""
    j01 = jn_zeros(0, 1)[0]
    x = brentq(lambda t: t * j1(t) - beta * j0(t), 1e-9, j01 - 1e-12)
    return x**2


@pytest.fixture(scope="module")
def disk_robin():
    return radial.solve_ball(2, 1.0, 2.0, 1.0)


class TestSolveBall:
    def test_neumann_is_zero_with_constant_profile(self):
        s = radial.solve_ball(2, 1.0, 2.5, 0.0)
        assert s.lambda1 == 0.0
        assert np.ptp(s.u) == 0.0
        expected = radial.ball_volume(2, 1.0) ** (-1 / 2.5)
        assert s.u[0] == pytest.approx(expected, rel=1e-12)

    def test_p2_disk_matches_bessel_root(self, disk_robin):
        assert disk_robin.lambda1 == pytest.approx(bessel_robin_lambda(1.0), rel=1e-8)

    def test_p2_disk_dirichlet_matches_bessel_zero(self):
        s = radial.solve_ball(2, 1.0, 2.0, math.inf)
        assert s.lambda1 == pytest.approx(jn_zeros(0, 1)[0] ** 2, rel=1e-8)

    def test_profile_invariants(self, disk_robin):
        s = disk_robin
        assert np.all(s.u > 0)
        assert s.du[0] == pytest.approx(0.0, abs=1e-10)
        assert s.du.max() <= 1e-10
        assert radial.boundary_identity_residual(s) < 1e-8

    def test_normalization(self, disk_robin):
        s = disk_robin
        val = radial.unit_sphere_area(2) * np.trapezoid(
            np.abs(s.u) ** s.p * s.r ** (s.n - 1), s.r
        )
        assert val == pytest.approx(1.0, abs=1e-9)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            radial.solve_ball(1, 1.0, 2.0, 1.0)
        with pytest.raises(ValueError):
            radial.solve_ball(2, 1.0, 0.9, 1.0)
        with pytest.raises(ValueError):
            radial.solve_ball(2, 1.0, 2.0, -0.5)


class TestEvaluate:
    def test_zero_slope_at_origin(self, disk_robin):
        _, du = radial.evaluate(disk_robin, 0.0)
        assert abs(du) < 1e-9

    def test_robin_relation_at_boundary(self, disk_robin):
        u, du = radial.evaluate(disk_robin, disk_robin.radius)
        p, beta = disk_robin.p, disk_robin.beta
        res = abs(du) ** (p - 2) * du + beta * abs(u) ** (p - 2) * u
        assert abs(res) / (beta * abs(u) ** (p - 1)) < 1e-8

    def test_profile_matches_bessel(self, disk_robin):
        x = math.sqrt(disk_robin.lambda1)
        r = np.linspace(0.0, 1.0, 41)
        u, _ = radial.evaluate(disk_robin, r)
        u0, _ = radial.evaluate(disk_robin, 0.0)
        assert np.abs(u / u0 - j0(x * r)).max() < 1e-6

    def test_out_of_range(self, disk_robin):
        with pytest.raises(ValueError):
            radial.evaluate(disk_robin, 1.5)


class TestProperties:
    def test_monotone_in_beta_and_dirichlet_limit(self):
        lams = [radial.solve_ball(2, 1.0, 2.0, b).lambda1 for b in (0.5, 1.0, 5.0, 50.0)]
        assert all(x < y for x, y in zip(lams, lams[1:]))
        lam_d = radial.dirichlet_lambda(2, 1.0, 2.0)
        assert all(x < lam_d for x in lams)
        assert radial.solve_ball(2, 1.0, 2.0, 1e4).lambda1 == pytest.approx(
            lam_d, rel=5e-2
        )

    def test_dirichlet_scaling_law(self):
        lam1 = radial.dirichlet_lambda(2, 1.0, 2.0)
        for R in (0.5, 2.0):
            assert radial.dirichlet_lambda(2, R, 2.0) == pytest.approx(
                lam1 / R**2, rel=1e-8
            )

    def test_grid_convergence(self, monkeypatch):
        base = radial.solve_ball(2, 1.0, 3.0, 1.0).lambda1
        monkeypatch.setattr(radial, "IVP_RTOL", 1e-13)
        monkeypatch.setattr(radial, "IVP_ATOL", 1e-15)
        tight = radial.solve_ball(2, 1.0, 3.0, 1.0).lambda1
        assert abs(tight - base) / base <= 2e-9

    def test_higher_dimension_dirichlet(self):
        # n = 3, p = 2 Dirichlet ball: lambda = pi^2 (u = sin(pi r)/r).
        s = radial.solve_ball(3, 1.0, 2.0, math.inf)
        assert s.lambda1 == pytest.approx(np.pi**2, rel=1e-8)
