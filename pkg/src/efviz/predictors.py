"""Closed-form blow-up predictions and hypothesis classification.

The two checkable predictions are a horizon bound for zero-energy data with
positive velocity correlation, and a growth floor for negative-energy data.
Both live on the log-time axis; the horizon also reports its image on the
original time axis. Regime tags are fixed strings consumed by the JSON
summary: "theorem31", "theorem41", "out_of_hypothesis".
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from efviz.analysis import EnergyBreakdown, initial_energy
from efviz.discretization import Grid1D, integrate
from efviz.solver import initial_profile

REGIME_ZERO_ENERGY = "theorem31"
REGIME_NEGATIVE_ENERGY = "theorem41"
REGIME_OTHER = "out_of_hypothesis"


class HypothesisViolationError(ValueError):
    """Data fails a precondition of the prediction being evaluated."""


@dataclass(frozen=True)
class BlowupHorizon:
    """Upper bound for the blow-up instant, on both time axes."""

    tau_bound: float
    t_bound: float


def blowup_horizon(u0, u1, p: float, grid: Grid1D) -> BlowupHorizon:
    """Horizon (2/(p-1)) * int|u0| / int u0 u1 for zero-energy data.

    Needs positive velocity correlation e0 = int u0 u1 dx; the bound is the
    log-time instant by which the concavity argument forces J to vanish.
    """
    if not p > 1.0:
        raise HypothesisViolationError(f"p = {p} but the bound needs p > 1")
    u0 = np.asarray(u0, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    e0 = integrate(u0 * u1, grid)
    if e0 <= 0.0:
        raise HypothesisViolationError(
            f"int u0 u1 dx = {e0:.6g} <= 0; the horizon bound needs positive correlation"
        )
    tau = (2.0 / (p - 1.0)) * integrate(np.abs(u0), grid) / e0
    t_image = math.exp(tau) if tau < 700.0 else math.inf
    return BlowupHorizon(tau_bound=tau, t_bound=t_image)


def growth_floor(u0, e_w0: float, p: float, s, grid: Grid1D):
    """Lower bound on int w^2 dx at log-time s for negative-energy data.

    floor(s) = int u0^2 - 2 E(0) (p+1)/(p-1) [s e^{beta s} - (e^{beta s}-1)/beta],
    beta = (p-1)/2. The bracket vanishes at s = 0 and grows monotonically, so
    the floor starts at int u0^2 and rises.
    """
    if e_w0 >= 0.0:
        raise HypothesisViolationError(
            f"initial energy {e_w0:.6g} >= 0; the growth floor needs E(0) < 0"
        )
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0.0):
        raise ValueError("the floor is defined for s >= 0")
    beta = 0.5 * (p - 1.0)
    grow = np.exp(beta * s_arr)
    bracket = s_arr * grow - (grow - 1.0) / beta
    u0 = np.asarray(u0, dtype=float)
    base = integrate(u0**2, grid)
    out = base - 2.0 * e_w0 * ((p + 1.0) / (p - 1.0)) * bracket
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class RegimeReport:
    """Which hypothesis set the data lands in, and the numbers that decided it."""

    e0: float
    e_w0: float
    narrow: bool
    regime: str
    eps_e: float
    energy: EnergyBreakdown


def classify_regime(
    u0,
    u1,
    grid: Grid1D,
    p: float,
    power_mode: str = "odd",
    eps_e: float | None = None,
) -> RegimeReport:
    """Tag data as zero-energy, negative-energy, or out of hypothesis.

    Zero energy is a tolerance band around E_w(0) = 0, scaled by the size of
    the energy components, since exact zeros only arise from the amplitude
    bisection. Both in-hypothesis regimes also need e0 > 0 and a narrow
    interval.
    """
    u0 = np.asarray(u0, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    bd = initial_energy(u0, u1, grid, p, power_mode)
    e0 = integrate(u0 * u1, grid)
    if eps_e is None:
        scale = abs(bd.kinetic) + abs(bd.elastic) + abs(bd.mass) + abs(bd.potential)
        eps_e = 1e-8 * (1.0 + scale)
    e_w0 = bd.e_w
    if e0 > 0.0 and grid.narrow and abs(e_w0) <= eps_e:
        regime = REGIME_ZERO_ENERGY
    elif e0 > 0.0 and grid.narrow and e_w0 < -eps_e:
        regime = REGIME_NEGATIVE_ENERGY
    else:
        regime = REGIME_OTHER
    return RegimeReport(e0=e0, e_w0=e_w0, narrow=grid.narrow, regime=regime, eps_e=eps_e, energy=bd)


def bisect_zero_energy_amplitude(
    grid: Grid1D,
    p: float,
    velocity_ratio: float = 0.5,
    profile: str = "sine",
    power_mode: str = "odd",
    lo: float = 1e-3,
    hi: float = 40.0,
    iterations: int = 200,
) -> float:
    """Amplitude c with E(c phi, ratio c phi) = 0 on this grid, by bisection.

    The quadratic part dominates for small c and the potential for large c,
    so the doubled energy crosses zero exactly once on (0, inf) whenever the
    quadratic part is positive. The returned amplitude is grid-dependent by
    design: runs seeded with it sit on the discrete zero-energy manifold.
    """
    shape = initial_profile(profile, grid)

    def doubled_energy(c: float) -> float:
        return initial_energy(c * shape, velocity_ratio * c * shape, grid, p, power_mode).total

    f_lo, f_hi = doubled_energy(lo), doubled_energy(hi)
    if not (f_lo > 0.0 > f_hi):
        raise ValueError(
            f"zero energy not bracketed on [{lo}, {hi}]: E({lo}) = {f_lo:.6g}, E({hi}) = {f_hi:.6g}"
        )
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if doubled_energy(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
