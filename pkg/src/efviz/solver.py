"""Explicit leapfrog integration of the transformed blow-up model.

Two equivalent forms of the same dynamics are stepped on the log-time axis
tau with homogeneous Dirichlet boundaries:

  v-form   v_tt - v_xx + conv(mu, v_xx) = v_t + sigma_p(v) + f_v
  w-form   w_tt - w_xx + e^{-tau/2} conv(e^{s/2} mu, w_xx)
                        = w/4 + e^{(p-1)tau/2} sigma_p(w) + f_w

with v = e^{tau/2} w, f_v = e^{tau/2} f_w. Both use the same three-level
update; the v-form treats its first-order term by a centered difference,
which keeps the scheme explicit and second order. Runs terminate at the
horizon, at a sup-norm blow-up threshold, or on the first non-finite value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from efviz.discretization import (
    Grid1D,
    MemoryAccumulator,
    memory_convolution,
    second_derivative,
    staggered_gradient,
)
from efviz.kernel import RelaxationKernel

W_FORM = "w_form"
V_FORM = "v_form"

HORIZON = "horizon_reached"
BLOWUP = "blowup_detected"
NONFINITE = "nan_detected"


class BoundaryCompatibilityError(ValueError):
    """Initial profile does not vanish at the interval endpoints."""


def nonlinearity(w: np.ndarray, p: float, power_mode: str = "odd") -> np.ndarray:
    """Real-valued power w^p for p > 1.

    "odd" extends by sign(w)|w|^p, the usual convention for blow-up work;
    "positive_part" clips negative values to zero first.
    """
    if power_mode == "odd":
        return np.sign(w) * np.abs(w) ** p
    if power_mode == "positive_part":
        return np.maximum(w, 0.0) ** p
    raise ValueError(f"unknown power_mode {power_mode!r}")


# Shape functions in the normalized coordinate xi = (x - r1)/(r2 - r1).
_PROFILES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sine": lambda xi: np.sin(np.pi * xi),
    "cosine": lambda xi: np.cos(np.pi * xi),
    "zero": lambda xi: np.zeros_like(xi),
}


def initial_profile(name: str, grid: Grid1D, amplitude: float = 1.0) -> np.ndarray:
    """Interior nodal values of a named profile, boundary compatibility enforced."""
    try:
        shape = _PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown initial profile {name!r}; choose from {sorted(_PROFILES)}")
    ends = amplitude * shape(np.array([0.0, 1.0]))
    worst = float(np.max(np.abs(ends)))
    if worst > 1e-12:
        raise BoundaryCompatibilityError(
            f"profile {name!r} reaches {worst:.3g} at an endpoint; "
            "fields must vanish on the boundary"
        )
    xi = (grid.x - grid.r1) / grid.width
    return amplitude * shape(xi)


@dataclass(frozen=True)
class StandingWaveSolution:
    """Forced exact solution w(tau, x) = cos(tau) sin(pi xi).

    The matching source is closed form for exponential-sum kernels because
    the memory integral of cos(s) against one decaying mode is elementary.
    Used to measure space-time convergence order against a known answer.
    """

    name: str = "standing_wave"

    def exact_w(self, tau: float, grid: Grid1D) -> np.ndarray:
        xi = (grid.x - grid.r1) / grid.width
        return math.cos(tau) * np.sin(np.pi * xi)

    def exact(self, tau: float, grid: Grid1D, form: str) -> np.ndarray:
        w = self.exact_w(tau, grid)
        return math.exp(0.5 * tau) * w if form == V_FORM else w

    def rate_w(self, tau: float, grid: Grid1D) -> np.ndarray:
        xi = (grid.x - grid.r1) / grid.width
        return -math.sin(tau) * np.sin(np.pi * xi)

    def rate(self, tau: float, grid: Grid1D, form: str) -> np.ndarray:
        dw = self.rate_w(tau, grid)
        if form == V_FORM:
            return math.exp(0.5 * tau) * (dw + 0.5 * self.exact_w(tau, grid))
        return dw

    def _memory_factor(self, tau: float, kernel: RelaxationKernel) -> float:
        """e^{-tau/2} integral(e^{s/2} mu(tau-s) cos(s) ds, 0, tau), exactly."""
        total = 0.0
        for a, b in kernel.terms:
            c = b + 0.5
            # integral(e^{cs} cos s ds, 0, tau) damped by e^{-(b+1/2)tau} up front
            # so every exponential stays <= 1.
            damped = (c * math.cos(tau) + math.sin(tau)) / (c * c + 1.0)
            total += a * (damped - c * math.exp(-c * tau) / (c * c + 1.0))
        return total

    def source_w(self, tau: float, cfg: "ScenarioConfig") -> np.ndarray:
        grid, kernel = cfg.grid, cfg.kernel
        lam = (math.pi / grid.width) ** 2
        xi = (grid.x - grid.r1) / grid.width
        prof = np.sin(np.pi * xi)
        w = math.cos(tau) * prof
        mem = -lam * self._memory_factor(tau, kernel) * prof
        return (
            (-math.cos(tau) + lam * math.cos(tau) - 0.25 * math.cos(tau)) * prof
            + mem
            - math.exp(0.5 * (cfg.p - 1.0) * tau) * nonlinearity(w, cfg.p, cfg.power_mode)
        )

    def source(self, tau: float, cfg: "ScenarioConfig") -> np.ndarray:
        f = self.source_w(tau, cfg)
        return math.exp(0.5 * tau) * f if cfg.form == V_FORM else f


MANUFACTURED = {"standing_wave": StandingWaveSolution}


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Validated description of one run. Arrays hold interior nodal values."""

    p: float
    grid: Grid1D
    kernel: RelaxationKernel
    u0: np.ndarray
    u1: np.ndarray
    dtau: float
    tau_max: float
    form: str = W_FORM
    blowup_threshold: float = 1e8
    power_mode: str = "odd"
    cfl_safety: float = 0.5
    record_every: int = 1
    manufactured: StandingWaveSolution | None = None

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError(f"p = {self.p} but the model needs p > 1")
        if self.form not in (W_FORM, V_FORM):
            raise ValueError(f"form must be {W_FORM!r} or {V_FORM!r}, got {self.form!r}")
        if self.power_mode not in ("odd", "positive_part"):
            raise ValueError(f"unknown power_mode {self.power_mode!r}")
        if not self.tau_max > 0.0:
            raise ValueError("tau_max must be positive")
        if not 0.0 < self.dtau <= self.cfl_safety * self.grid.dx * (1.0 + 1e-12):
            raise ValueError(
                f"dtau = {self.dtau} exceeds the stability budget "
                f"cfl_safety*dx = {self.cfl_safety * self.grid.dx:.6g}"
            )
        if self.blowup_threshold <= 0.0:
            raise ValueError("blowup_threshold must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be a positive integer")
        for label, arr in (("u0", self.u0), ("u1", self.u1)):
            if arr.shape != (self.grid.n,):
                raise ValueError(f"{label} has shape {arr.shape}, expected ({self.grid.n},)")
            if not np.isfinite(arr).all():
                raise ValueError(f"{label} contains non-finite values")
        if self.manufactured is not None and self.kernel.family != "exponential_sum":
            raise ValueError("manufactured runs need an exponential-sum kernel")

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(self.tau_max / self.dtau - 1e-9))


def auto_dtau(grid: Grid1D, cfl_safety: float = 0.5) -> float:
    """Default time step: cfl_safety times the mesh width (unit wave speed)."""
    return cfl_safety * grid.dx


def initial_rate(cfg: ScenarioConfig) -> np.ndarray:
    """Exact time derivative of the evolved variable at tau = 0.

    The v-form carries u1 directly; the w-form subtracts the share taken by
    the e^{tau/2} factor: w_tau(0) = u1 - u0/2.
    """
    if cfg.form == V_FORM:
        return cfg.u1.copy()
    return cfg.u1 - 0.5 * cfg.u0


@dataclass
class RunState:
    """Three-level stencil plus the memory bookkeeping between steps.

    gxx_hist rows 0..m hold second-derivative snapshots of every field seen
    so far; the accumulator (exponential kernels) carries the same data in
    O(1) recurrence form. curr is the field at step index m.
    """

    m: int
    curr: np.ndarray
    prev: np.ndarray
    gxx_hist: np.ndarray
    accumulator: MemoryAccumulator | None
    terminated: str | None = None


def _memory_term(state: RunState, cfg: ScenarioConfig, g_curr: np.ndarray) -> np.ndarray:
    state.gxx_hist[state.m] = g_curr
    if state.accumulator is not None:
        return state.accumulator.push(g_curr)
    rate = 0.5 if cfg.form == W_FORM else 0.0
    return memory_convolution(cfg.kernel, cfg.dtau, state.gxx_hist[: state.m + 1], rate)


def _forcing(cfg: ScenarioConfig, tau: float) -> float | np.ndarray:
    if cfg.manufactured is None:
        return 0.0
    return cfg.manufactured.source(tau, cfg)


def start_state(cfg: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """Field and rate at tau = 0.

    A manufactured run draws both from the exact solution; the configured
    u0/u1 are ignored there so the measured error is pure discretization
    error. Ordinary runs use the config data.
    """
    if cfg.manufactured is not None:
        return (
            cfg.manufactured.exact(0.0, cfg.grid, cfg.form),
            cfg.manufactured.rate(0.0, cfg.grid, cfg.form),
        )
    return cfg.u0.copy(), initial_rate(cfg)


def initialize(cfg: ScenarioConfig) -> RunState:
    """Seed the three-level stencil with a second-order Taylor start."""
    n_steps = cfg.n_steps
    field0, rate0 = start_state(cfg)
    gxx_hist = np.empty((n_steps + 1, cfg.grid.n))
    acc = None
    if cfg.kernel.family == "exponential_sum":
        source_rate = 0.5 if cfg.form == W_FORM else 0.0
        acc = MemoryAccumulator(cfg.kernel, cfg.dtau, cfg.grid.n, source_rate)

    lap0 = second_derivative(field0, cfg.grid)
    gxx_hist[0] = lap0
    if acc is not None:
        acc.push(lap0)
    # Memory term vanishes at tau = 0; the curvature comes from the PDE.
    if cfg.form == W_FORM:
        curv = lap0 + 0.25 * field0 + nonlinearity(field0, cfg.p, cfg.power_mode)
    else:
        curv = lap0 + rate0 + nonlinearity(field0, cfg.p, cfg.power_mode)
    curv = curv + _forcing(cfg, 0.0)
    field1 = field0 + cfg.dtau * rate0 + 0.5 * cfg.dtau**2 * curv
    return RunState(m=1, curr=field1, prev=field0, gxx_hist=gxx_hist, accumulator=acc)


def step(state: RunState, cfg: ScenarioConfig) -> RunState:
    """Advance one leapfrog step in place and return the state."""
    if state.terminated is not None:
        raise RuntimeError("stepping a terminated run")
    tau = state.m * cfg.dtau
    g_curr = second_derivative(state.curr, cfg.grid)
    mem = _memory_term(state, cfg, g_curr)
    if cfg.form == W_FORM:
        rhs = (
            g_curr
            - mem
            + 0.25 * state.curr
            + math.exp(0.5 * (cfg.p - 1.0) * tau) * nonlinearity(state.curr, cfg.p, cfg.power_mode)
            + _forcing(cfg, tau)
        )
        nxt = 2.0 * state.curr - state.prev + cfg.dtau**2 * rhs
    else:
        rhs = g_curr - mem + nonlinearity(state.curr, cfg.p, cfg.power_mode) + _forcing(cfg, tau)
        half = 0.5 * cfg.dtau
        nxt = (cfg.dtau**2 * rhs + 2.0 * state.curr - (1.0 + half) * state.prev) / (1.0 - half)
    if not np.isfinite(nxt).all():
        state.terminated = NONFINITE
        return state
    state.prev = state.curr
    state.curr = nxt
    state.m += 1
    return state


@dataclass(frozen=True, eq=False)
class RunResult:
    """Everything recorded by a run, one row per computed step."""

    cfg: ScenarioConfig
    taus: np.ndarray
    fields: np.ndarray
    gradients: np.ndarray
    laplacians: np.ndarray
    sup_norms: np.ndarray
    rate0: np.ndarray
    termination: str
    termination_tau: float
    tau_b: float | None

    @property
    def n_recorded(self) -> int:
        return self.taus.size

    def blew_up(self) -> bool:
        return self.termination == BLOWUP


def _crossing_time(tau_lo: float, tau_hi: float, sup_lo: float, sup_hi: float, threshold: float) -> float:
    # Interpolate the log of the sup-norm; falls back to the step endpoint
    # when the previous value carries no information.
    if sup_lo <= 0.0 or not math.isfinite(sup_hi):
        return tau_hi
    la, lb, lt = math.log(sup_lo), math.log(sup_hi), math.log(threshold)
    if lb <= la:
        return tau_hi
    return tau_lo + (tau_hi - tau_lo) * (lt - la) / (lb - la)


def run(cfg: ScenarioConfig) -> RunResult:
    """Drive the scheme to the horizon, to blow-up, or to a non-finite value."""
    state = initialize(cfg)
    n_steps = cfg.n_steps
    n = cfg.grid.n
    fields = np.empty((n_steps + 1, n))
    sups = np.empty(n_steps + 1)
    fields[0] = state.prev
    sups[0] = float(np.max(np.abs(state.prev)))
    fields[1] = state.curr
    sups[1] = float(np.max(np.abs(state.curr)))

    termination = HORIZON
    tau_b = None
    last = 1
    for m in range(1, n_steps + 1):
        if sups[m] > cfg.blowup_threshold:
            termination = BLOWUP
            tau_b = _crossing_time(
                (m - 1) * cfg.dtau, m * cfg.dtau, sups[m - 1], sups[m], cfg.blowup_threshold
            )
            last = m
            break
        last = m
        if m == n_steps:
            break
        state = step(state, cfg)
        if state.terminated == NONFINITE:
            termination = NONFINITE
            last = m
            break
        fields[m + 1] = state.curr
        sups[m + 1] = float(np.max(np.abs(state.curr)))

    taus = cfg.dtau * np.arange(last + 1)
    fields = fields[: last + 1]
    sups = sups[: last + 1]
    grads = np.empty((last + 1, n + 1))
    laps = np.empty((last + 1, n))
    for j in range(last + 1):
        grads[j] = staggered_gradient(fields[j], cfg.grid)
        laps[j] = second_derivative(fields[j], cfg.grid)

    if termination == BLOWUP:
        termination_tau = float(tau_b)
    elif termination == NONFINITE:
        termination_tau = float((last + 1) * cfg.dtau)
    else:
        termination_tau = float(taus[-1])
    return RunResult(
        cfg=cfg,
        taus=taus,
        fields=fields,
        gradients=grads,
        laplacians=laps,
        sup_norms=sups,
        rate0=start_state(cfg)[1],
        termination=termination,
        termination_tau=termination_tau,
        tau_b=tau_b,
    )


def pullback_to_t(result: RunResult, ts) -> np.ndarray:
    """Sample the original-variable solution u(t, x) = sqrt(t) w(ln t, x).

    Linear interpolation in tau between stored frames; t must lie in
    [1, exp(last recorded tau)].
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if np.any(ts < 1.0):
        raise ValueError("original time starts at t = 1")
    taus = np.log(ts)
    if np.any(taus > result.taus[-1] + 1e-12):
        raise ValueError("requested time beyond the recorded horizon")
    out = np.empty((ts.size, result.fields.shape[1]))
    for i, tau in enumerate(np.clip(taus, 0.0, result.taus[-1])):
        j = min(int(tau / result.cfg.dtau), result.taus.size - 1)
        if j == result.taus.size - 1:
            frame = result.fields[j]
        else:
            theta = (tau - result.taus[j]) / result.cfg.dtau
            frame = (1.0 - theta) * result.fields[j] + theta * result.fields[j + 1]
        if result.cfg.form == W_FORM:
            out[i] = math.sqrt(ts[i]) * frame
        else:
            out[i] = frame
    return out


def manufactured_error(result: RunResult) -> float:
    """Space-time sup-norm error against the manufactured exact solution."""
    ms = result.cfg.manufactured
    if ms is None:
        raise ValueError("run has no manufactured solution to compare against")
    worst = 0.0
    for j, tau in enumerate(result.taus):
        exact = ms.exact(float(tau), result.cfg.grid, result.cfg.form)
        worst = max(worst, float(np.max(np.abs(result.fields[j] - exact))))
    return worst


def transform_gap(result_v: RunResult, result_w: RunResult) -> float:
    """Max-norm mismatch between a v-form run and the lifted w-form run."""
    if result_v.cfg.form != V_FORM or result_w.cfg.form != W_FORM:
        raise ValueError("pass one v-form result and one w-form result, in that order")
    if abs(result_v.cfg.dtau - result_w.cfg.dtau) > 1e-15:
        raise ValueError("runs must share a time step")
    m = min(result_v.n_recorded, result_w.n_recorded)
    gap = 0.0
    for j in range(m):
        lifted = math.exp(0.5 * result_w.taus[j]) * result_w.fields[j]
        gap = max(gap, float(np.max(np.abs(result_v.fields[j] - lifted))))
    return gap
