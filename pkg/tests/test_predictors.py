"""Blow-up horizon, growth floor, regime tags, zero-energy bisection."""
import math

import numpy as np
import pytest

from efviz.discretization import Grid1D, integrate
from efviz.predictors import (
    HypothesisViolationError,
    bisect_zero_energy_amplitude,
    blowup_horizon,
    classify_regime,
    growth_floor,
)
from efviz.solver import initial_profile


@pytest.fixture(scope="module")
def grid400():
    return Grid1D(0.0, 1.0, 400)


class TestBlowupHorizon:
    def test_sine_oracle_p3(self, grid400):
        """u0 = u1 = sin(pi x): bound = (2/2) (2/pi) / (1/2) = 4/pi."""
        u0 = initial_profile("sine", grid400)
        h = blowup_horizon(u0, u0, 3.0, grid400)
        assert h.tau_bound == pytest.approx(4.0 / math.pi, abs=1e-5)
        assert h.t_bound == pytest.approx(math.exp(h.tau_bound), rel=1e-12)

    def test_sine_oracle_p5(self, grid400):
        u0 = initial_profile("sine", grid400)
        h = blowup_horizon(u0, u0, 5.0, grid400)
        assert h.tau_bound == pytest.approx(2.0 / math.pi, abs=1e-5)

    def test_velocity_scale_law(self, grid400):
        u0 = initial_profile("sine", grid400)
        base = blowup_horizon(u0, u0, 3.0, grid400).tau_bound
        scaled = blowup_horizon(u0, 4.0 * u0, 3.0, grid400).tau_bound
        assert scaled == pytest.approx(base / 4.0, rel=1e-12)

    def test_negative_correlation_rejected(self, grid400):
        u0 = initial_profile("sine", grid400)
        with pytest.raises(HypothesisViolationError, match="positive correlation"):
            blowup_horizon(u0, -u0, 3.0, grid400)

    def test_zero_velocity_rejected(self, grid400):
        u0 = initial_profile("sine", grid400)
        with pytest.raises(HypothesisViolationError):
            blowup_horizon(u0, np.zeros_like(u0), 3.0, grid400)

    def test_p_at_most_one_rejected(self, grid400):
        u0 = initial_profile("sine", grid400)
        with pytest.raises(HypothesisViolationError, match="p > 1"):
            blowup_horizon(u0, u0, 1.0, grid400)

    def test_huge_tau_maps_to_infinite_t(self, grid400):
        u0 = initial_profile("sine", grid400)
        h = blowup_horizon(u0, 1e-6 * u0, 3.0, grid400)
        assert h.tau_bound > 700.0
        assert h.t_bound == math.inf


class TestGrowthFloor:
    def test_starts_at_data_norm(self, grid400):
        u0 = initial_profile("sine", grid400)
        floor = growth_floor(u0, -1.0, 3.0, 0.0, grid400)
        assert floor == pytest.approx(integrate(u0**2, grid400), rel=1e-12)

    def test_unit_energy_oracle_at_s1(self, grid400):
        """p = 3, E = -1: bracket(1) = e - (e-1) = 1, floor = 1/2 + 4."""
        u0 = initial_profile("sine", grid400)
        floor = growth_floor(u0, -1.0, 3.0, 1.0, grid400)
        assert floor == pytest.approx(integrate(u0**2, grid400) + 4.0, rel=1e-10)

    def test_monotone_in_s(self, grid400):
        u0 = initial_profile("sine", grid400)
        s = np.linspace(0.0, 2.0, 50)
        vals = growth_floor(u0, -0.3, 3.0, s, grid400)
        assert vals.shape == s.shape
        assert np.all(np.diff(vals) > 0.0)

    def test_deeper_energy_raises_floor(self, grid400):
        u0 = initial_profile("sine", grid400)
        lo = growth_floor(u0, -0.5, 3.0, 1.0, grid400)
        hi = growth_floor(u0, -2.0, 3.0, 1.0, grid400)
        assert hi > lo

    def test_nonnegative_energy_rejected(self, grid400):
        u0 = initial_profile("sine", grid400)
        with pytest.raises(HypothesisViolationError, match="E\\(0\\) < 0"):
            growth_floor(u0, 0.0, 3.0, 1.0, grid400)

    def test_negative_s_rejected(self, grid400):
        u0 = initial_profile("sine", grid400)
        with pytest.raises(ValueError, match="s >= 0"):
            growth_floor(u0, -1.0, 3.0, -0.1, grid400)


class TestRegimes:
    def test_zero_data_is_out_of_hypothesis(self, grid200):
        z = np.zeros(grid200.n)
        rep = classify_regime(z, z, grid200, 3.0)
        assert rep.regime == "out_of_hypothesis"
        assert rep.e0 == 0.0

    def test_wide_interval_is_out_of_hypothesis(self):
        g = Grid1D(0.0, 2.0, 100)
        u0 = initial_profile("sine", g)
        rep = classify_regime(5.1 * u0, 2.55 * u0, g, 3.0)
        assert not rep.narrow
        assert rep.regime == "out_of_hypothesis"

    def test_bisected_amplitude_is_zero_energy(self, grid200):
        c = bisect_zero_energy_amplitude(grid200, 3.0)
        u0 = c * initial_profile("sine", grid200)
        rep = classify_regime(u0, 0.5 * u0, grid200, 3.0)
        assert rep.regime == "theorem31"
        assert abs(rep.e_w0) <= rep.eps_e
        assert rep.e0 > 0.0

    def test_inflated_amplitude_is_negative_energy(self, grid200):
        c = 1.1 * bisect_zero_energy_amplitude(grid200, 3.0)
        u0 = c * initial_profile("sine", grid200)
        rep = classify_regime(u0, 0.5 * u0, grid200, 3.0)
        assert rep.regime == "theorem41"
        assert rep.e_w0 == pytest.approx(-15.675077213308398, rel=1e-9)

    def test_small_data_positive_energy_is_out(self, grid200):
        u0 = 0.05 * initial_profile("sine", grid200)
        rep = classify_regime(u0, 0.5 * u0, grid200, 3.0)
        assert rep.e_w0 > rep.eps_e
        assert rep.regime == "out_of_hypothesis"

    def test_explicit_band_overrides_default(self, grid200):
        u0 = 0.05 * initial_profile("sine", grid200)
        rep = classify_regime(u0, 0.5 * u0, grid200, 3.0, eps_e=100.0)
        assert rep.regime == "theorem31"


class TestBisection:
    def test_matches_continuum_amplitude(self, grid200):
        """Zero of c^2 (pi^2/2 - 1/8) - 3 c^4 / 16 at ratio 1/2."""
        c = bisect_zero_energy_amplitude(grid200, 3.0)
        target = math.sqrt((16.0 / 3.0) * (math.pi**2 / 2.0 - 0.125))
        assert c == pytest.approx(target, rel=1e-4)
        assert c == pytest.approx(5.064754941450671, rel=1e-12)

    def test_energy_at_root_vanishes(self, grid200):
        from efviz.analysis import initial_energy

        c = bisect_zero_energy_amplitude(grid200, 3.0)
        u0 = c * initial_profile("sine", grid200)
        bd = initial_energy(u0, 0.5 * u0, grid200, 3.0)
        assert abs(bd.total) < 1e-10

    def test_unbracketed_interval_rejected(self, grid200):
        with pytest.raises(ValueError, match="not bracketed"):
            bisect_zero_energy_amplitude(grid200, 3.0, lo=1e-3, hi=0.1)
