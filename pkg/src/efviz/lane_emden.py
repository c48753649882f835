"""Polytrope ODE with known closed forms, used to anchor the time integrators.

d/dt(t^2 u') + t^2 u^p = 0, u(0) = 1, u'(0) = 0. The origin divides by t^2,
so integration starts a short way in on a degree-4 series and proceeds by
the classical 4th-order one-step method on the system u' = q/t^2,
q' = -t^2 sign(u)|u|^p.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LaneEmdenProblem:
    p: float
    t_max: float
    dt: float
    start_factor: int = 10  # series handoff at t0 = start_factor*dt

    def __post_init__(self):
        if self.p < 1.0:
            raise ValueError("exponent must be at least 1")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.start_factor < 1:
            raise ValueError("start_factor must be a positive integer")
        if self.t_max <= self.start_factor * self.dt:
            raise ValueError("horizon ends before the series handoff point")


def series_start(p: float, t: float) -> tuple[float, float]:
    """Degree-4 series value and its flux q = t^2 u' near the origin.

    u = 1 - t^2/6 + p t^4/120; substituting into the equation fixes both
    coefficients, so the truncation error is O(t^6).
    """
    u = 1.0 - t * t / 6.0 + p * t**4 / 120.0
    q = -(t**3) / 3.0 + p * t**5 / 30.0
    return u, q


def _odd_power(u: float, p: float) -> float:
    return math.copysign(abs(u) ** p, u)


def solve_lane_emden(prob: LaneEmdenProblem) -> tuple[np.ndarray, np.ndarray]:
    """Sampled u on the dt grid from the handoff point to the horizon."""
    p, dt = prob.p, prob.dt
    t0 = prob.start_factor * dt
    n = int(round((prob.t_max - t0) / dt))
    ts = t0 + dt * np.arange(n + 1)
    us = np.empty(n + 1)
    u, q = series_start(p, t0)
    us[0] = u

    def du(t: float, u_: float, q_: float) -> tuple[float, float]:
        return q_ / (t * t), -(t * t) * _odd_power(u_, p)

    t = t0
    for i in range(1, n + 1):
        k1u, k1q = du(t, u, q)
        k2u, k2q = du(t + 0.5 * dt, u + 0.5 * dt * k1u, q + 0.5 * dt * k1q)
        k3u, k3q = du(t + 0.5 * dt, u + 0.5 * dt * k2u, q + 0.5 * dt * k2q)
        k4u, k4q = du(t + dt, u + dt * k3u, q + dt * k3q)
        u += dt * (k1u + 2.0 * k2u + 2.0 * k3u + k4u) / 6.0
        q += dt * (k1q + 2.0 * k2q + 2.0 * k3q + k4q) / 6.0
        t = t0 + i * dt
        us[i] = u
    return ts, us


def closed_form(p: float, t):
    """Exact solutions: sin(t)/t for p = 1, (1 + t^2/3)^{-1/2} for p = 5."""
    t = np.asarray(t, dtype=float)
    if p == 1:
        out = np.where(t == 0.0, 1.0, np.sin(t) / np.where(t == 0.0, 1.0, t))
    elif p == 5:
        out = 1.0 / np.sqrt(1.0 + t * t / 3.0)
    else:
        raise ValueError(f"no closed form wired for p = {p}; supported: 1, 5")
    return out if out.ndim else float(out)


def relative_error(u, u_exact):
    """|u - exact| / max(|exact|, 1e-3); the floor keeps zeros of the exact
    solution (the p = 1 case has one inside the test range) from blowing up
    an otherwise tiny absolute error."""
    u = np.asarray(u, dtype=float)
    u_exact = np.asarray(u_exact, dtype=float)
    return np.abs(u - u_exact) / np.maximum(np.abs(u_exact), 1e-3)
