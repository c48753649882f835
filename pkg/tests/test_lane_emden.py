"""Polytrope integrator against its closed forms and a symbolic series."""
import math

import numpy as np
import pytest
import sympy

from efviz.lane_emden import (
    LaneEmdenProblem,
    closed_form,
    relative_error,
    series_start,
    solve_lane_emden,
)


class TestClosedForms:
    def test_p1_is_sinc(self):
        assert closed_form(1, 0.0) == 1.0
        assert closed_form(1, math.pi) == pytest.approx(0.0, abs=1e-15)
        assert closed_form(1, 2.0) == pytest.approx(math.sin(2.0) / 2.0, rel=1e-15)

    def test_p5_is_algebraic(self):
        assert closed_form(5, 0.0) == 1.0
        assert closed_form(5, 3.0) == pytest.approx(0.5, rel=1e-15)

    def test_array_input(self):
        t = np.array([0.0, 1.0, 2.0])
        out = closed_form(1, t)
        assert out.shape == t.shape
        assert out[0] == 1.0

    def test_unsupported_exponent(self):
        with pytest.raises(ValueError, match="supported: 1, 5"):
            closed_form(3, 1.0)


class TestSeriesStart:
    def test_coefficients_match_symbolic_expansion(self):
        """Solve the ODE order by order with sympy and compare to the
        hard-coded degree-4 start."""
        t, p = sympy.symbols("t p", positive=True)
        a2, a4 = sympy.symbols("a2 a4")
        u = 1 + a2 * t**2 + a4 * t**4
        # residual of (t^2 u')' + t^2 u^p, expanded around t = 0 with u ~ 1
        lhs = sympy.diff(t**2 * sympy.diff(u, t), t)
        rhs = -(t**2) * (1 + p * (u - 1) + p * (p - 1) / 2 * (u - 1) ** 2)
        eqs = sympy.Poly((lhs - rhs).expand(), t).all_coeffs()[::-1]
        sol = sympy.solve([e for e in eqs if e != 0][:2], [a2, a4])
        assert sol[a2] == sympy.Rational(-1, 6)
        assert sympy.simplify(sol[a4] - p / 120) == 0

    def test_series_against_p1_exact(self):
        # sin(t)/t = 1 - t^2/6 + t^4/120 - O(t^6)
        for t in (0.01, 0.05):
            u, _ = series_start(1.0, t)
            assert abs(u - math.sin(t) / t) < t**6

    def test_flux_is_t2_du(self):
        h, t = 1e-6, 0.05
        up, _ = series_start(3.0, t + h)
        um, _ = series_start(3.0, t - h)
        _, q = series_start(3.0, t)
        assert q == pytest.approx(t * t * (up - um) / (2 * h), rel=1e-6)


class TestSolver:
    def test_p1_accuracy(self):
        prob = LaneEmdenProblem(p=1.0, t_max=10.0, dt=1e-3)
        ts, us = solve_lane_emden(prob)
        err = float(np.max(relative_error(us, closed_form(1, ts))))
        assert err < 1e-6

    def test_p5_accuracy(self):
        prob = LaneEmdenProblem(p=5.0, t_max=10.0, dt=1e-3)
        ts, us = solve_lane_emden(prob)
        err = float(np.max(relative_error(us, closed_form(5, ts))))
        assert err < 1e-6

    def test_grid_runs_from_handoff_to_horizon(self):
        prob = LaneEmdenProblem(p=1.0, t_max=1.0, dt=0.01)
        ts, us = solve_lane_emden(prob)
        assert ts[0] == pytest.approx(0.1)
        assert ts[-1] == pytest.approx(1.0)
        assert us.shape == ts.shape

    def test_handoff_point_is_not_load_bearing(self):
        """Doubling the series handoff distance moves u(1) by < 1e-8."""
        base = LaneEmdenProblem(p=3.0, t_max=1.0, dt=1e-3, start_factor=10)
        far = LaneEmdenProblem(p=3.0, t_max=1.0, dt=1e-3, start_factor=20)
        _, u_base = solve_lane_emden(base)
        _, u_far = solve_lane_emden(far)
        assert abs(u_base[-1] - u_far[-1]) < 1e-8

    def test_relative_error_uses_floor_near_zeros(self):
        err = relative_error(np.array([1e-5]), np.array([0.0]))
        assert err[0] == pytest.approx(1e-2)

    def test_problem_validation(self):
        with pytest.raises(ValueError, match="at least 1"):
            LaneEmdenProblem(p=0.5, t_max=1.0, dt=1e-3)
        with pytest.raises(ValueError, match="dt"):
            LaneEmdenProblem(p=1.0, t_max=1.0, dt=0.0)
        with pytest.raises(ValueError, match="handoff"):
            LaneEmdenProblem(p=1.0, t_max=0.005, dt=1e-3)
        with pytest.raises(ValueError, match="start_factor"):
            LaneEmdenProblem(p=1.0, t_max=1.0, dt=1e-3, start_factor=0)
