"""Discrete functionals of a recorded run.

Everything here is a pure function of a RunResult: the five-part energy and
its decay, the integration-by-parts identity satisfied by the memory term,
the growth functionals A, J, L, F driving the concavity argument, and the
invariant suite behind the verify command.

Weight orientation: the elastic and history terms weight each stored lag r
by e^{-r/2} mu(r), the same damping the stepper applies to its convolution.
With the weight attached to the source time instead, the drift term picks up
an O(1) positive part and the decay test fails; the damped orientation is
provably nonincreasing for the dynamics integrated here.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from efviz.discretization import integrate, integrate_cells, memory_convolution
from efviz.solver import RunResult, W_FORM

log = logging.getLogger(__name__)

# CSV schema, fixed: column names and order are a wire contract.
DIAGNOSTIC_COLUMNS = (
    "tau",
    "sup_norm",
    "A",
    "J",
    "dJ",
    "d2J",
    "E_w",
    "kinetic",
    "elastic",
    "history",
    "mass",
    "potential",
    "L",
    "F",
    "lemma1_residual",
)

# Rows with sup-norm beyond this are treated as already inside the blow-up
# boundary layer: the concavity window stops there.
CALM_SUP_CAP = 1e3

# Decay and identity rows of the invariant suite are checked only while the
# stepper resolves the nonlinear frequency: dtau * omega <= this, with
# omega = sqrt(p e^{(p-1)tau/2} |w|^{p-1}) the local stiffness of the power
# term. Past that the three-level stencil aliases the oscillation and its
# per-step energy error is no longer O(dtau^2) with a bounded constant.
RESOLVED_PHASE_LIMIT = 0.1


@dataclass(frozen=True)
class EnergyBreakdown:
    """Five components of the doubled energy; total = 2 E_w by construction."""

    kinetic: float
    elastic: float
    history: float
    mass: float
    potential: float

    @property
    def total(self) -> float:
        return self.kinetic + self.elastic + self.history - self.mass - self.potential

    @property
    def e_w(self) -> float:
        return 0.5 * self.total


@dataclass(frozen=True, eq=False)
class EnergySeries:
    """Componentwise energy along a run, one entry per recorded step."""

    taus: np.ndarray
    kinetic: np.ndarray
    elastic: np.ndarray
    history: np.ndarray
    mass: np.ndarray
    potential: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.kinetic + self.elastic + self.history - self.mass - self.potential

    @property
    def e_w(self) -> np.ndarray:
        return 0.5 * self.total

    def breakdown(self, i: int) -> EnergyBreakdown:
        return EnergyBreakdown(
            kinetic=float(self.kinetic[i]),
            elastic=float(self.elastic[i]),
            history=float(self.history[i]),
            mass=float(self.mass[i]),
            potential=float(self.potential[i]),
        )

    def __len__(self) -> int:
        return self.taus.size


def _potential_integrand(w: np.ndarray, p: float, power_mode: str) -> np.ndarray:
    if power_mode == "positive_part":
        return np.maximum(w, 0.0) ** (p + 1.0)
    return np.abs(w) ** (p + 1.0)


def rate_series(result: RunResult) -> np.ndarray:
    """Time derivative of the evolved field at every recorded step.

    Row 0 is the exact initial rate; interior rows are centered; the final
    row is the one-sided second-order difference.
    """
    f = result.fields
    dtau = result.cfg.dtau
    out = np.empty_like(f)
    out[0] = result.rate0
    last = f.shape[0] - 1
    if last >= 2:
        out[1:last] = (f[2:] - f[: last - 1]) / (2.0 * dtau)
        out[last] = (3.0 * f[last] - 4.0 * f[last - 1] + f[last - 2]) / (2.0 * dtau)
    elif last == 1:
        out[1] = (f[1] - f[0]) / dtau
    return out


def _w_frames(result: RunResult) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fields, gradients and rates expressed in the damped variable.

    v-form data is pulled down by e^{-tau/2}; the product rule converts the
    stored v rate into w_tau = e^{-tau/2} (v_tau - v/2).
    """
    rates = rate_series(result)
    if result.cfg.form == W_FORM:
        return result.fields, result.gradients, rates
    scale = np.exp(-0.5 * result.taus)[:, None]
    wfields = scale * result.fields
    wgrads = scale * result.gradients
    wrates = scale * (rates - 0.5 * result.fields)
    return wfields, wgrads, wrates


def history_series(result: RunResult) -> np.ndarray:
    """Memory comparison integral at every recorded step.

    H(m) = integral over s of e^{-(tau_m - s)/2} mu(tau_m - s)
           * int |w_x(tau_m) - w_x(s)|^2 dx, composite trapezoid in s.
    """
    _, wgrads, _ = _w_frames(result)
    kernel = result.cfg.kernel
    dtau = result.cfg.dtau
    dx = result.cfg.grid.dx
    m_last = wgrads.shape[0] - 1
    lags = dtau * np.arange(m_last + 1)
    nu = np.exp(-0.5 * lags) * np.asarray(kernel.mu(lags))
    out = np.zeros(m_last + 1)
    if kernel.is_null:
        return out
    for m in range(1, m_last + 1):
        diff = wgrads[: m + 1] - wgrads[m]
        gd = dx * np.einsum("ij,ij->i", diff, diff)
        w = nu[m::-1].copy()
        w[0] *= 0.5
        w[-1] *= 0.5
        out[m] = dtau * float(w @ gd)
    return out


def energy_series(result: RunResult, history: np.ndarray | None = None) -> EnergySeries:
    """All five energy components along the run, in the damped variable."""
    cfg = result.cfg
    wfields, wgrads, wrates = _w_frames(result)
    taus = result.taus
    dx = cfg.grid.dx
    if history is None:
        history = history_series(result)

    kinetic = dx * np.einsum("ij,ij->i", wrates, wrates)
    gw = dx * np.einsum("ij,ij->i", wgrads, wgrads)
    coeff = np.array([1.0 - cfg.kernel.damped_mass(t) for t in taus])
    elastic = coeff * gw
    mass = 0.25 * dx * np.einsum("ij,ij->i", wfields, wfields)
    pot = _potential_integrand(wfields, cfg.p, cfg.power_mode)
    potential = (
        (2.0 / (cfg.p + 1.0)) * np.exp(0.5 * (cfg.p - 1.0) * taus) * (dx * pot.sum(axis=1))
    )
    return EnergySeries(
        taus=taus.copy(),
        kinetic=kinetic,
        elastic=elastic,
        history=history.copy(),
        mass=mass,
        potential=potential,
    )


def initial_energy(u0, u1, grid, p: float, power_mode: str = "odd") -> EnergyBreakdown:
    """Energy of the data alone, no run required; history is empty at tau = 0."""
    from efviz.discretization import staggered_gradient

    u0 = np.asarray(u0, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    w_rate = u1 - 0.5 * u0
    kinetic = integrate(w_rate**2, grid)
    elastic = integrate_cells(staggered_gradient(u0, grid) ** 2, grid)
    mass = 0.25 * integrate(u0**2, grid)
    potential = (2.0 / (p + 1.0)) * integrate(_potential_integrand(u0, p, power_mode), grid)
    bd = EnergyBreakdown(kinetic, elastic, 0.0, mass, potential)
    # Two published normalizations of the initial value disagree; keep both
    # visible. The tau-form (mass term) is the one every check here uses.
    e0 = integrate(u0 * u1, grid)
    alt = kinetic + elastic + e0 - potential
    log.debug("2E(0): tau-form %.12g; data-form display with +e0 in place of -mass: %.12g",
              bd.total, alt)
    return bd


def energy_monotonicity_report(series: EnergySeries) -> float:
    """Largest consecutive increment of E_w; negative means strictly decaying."""
    e = series.e_w
    if e.size < 2:
        return 0.0
    return float(np.max(np.diff(e)))


def dissipation_bound_check(series: EnergySeries, p: float) -> float:
    """Worst excess of E_w(tau) over the declared decay budget.

    Pairing the power term with w_tau turns its explicit e^{(p-1)s/2}
    factor into a drift, so the energy obeys

        E_w(tau) <= E_w(0) - (p-1)/4 * integral(potential(s) ds, 0, tau)

    with the potential component in its doubled-energy normalization. All
    other terms in the balance only dissipate, so any positive excess is
    discretization error.
    """
    q = series.potential
    dtau = float(series.taus[1] - series.taus[0]) if len(series) > 1 else 0.0
    cum = np.concatenate(([0.0], np.cumsum(0.5 * dtau * (q[1:] + q[:-1]))))
    bound = series.e_w[0] - 0.25 * (p - 1.0) * cum
    return float(np.max(series.e_w - bound))


def l2_series(result: RunResult) -> np.ndarray:
    """A(tau) = int w^2 dx at every recorded step (damped variable)."""
    wfields, _, _ = _w_frames(result)
    return result.cfg.grid.dx * np.einsum("ij,ij->i", wfields, wfields)


def memory_identity_residual(
    result: RunResult,
    m: int,
    history: np.ndarray | None = None,
    rates: np.ndarray | None = None,
) -> float:
    """Normalized defect of the memory integration-by-parts identity at step m.

    The left side pairs the stepper's damped memory term with w_tau; the
    right side is the six-term expansion over stored gradients, with both
    total-derivative terms differenced centrally. All factors are written on
    the lag so nothing grows with tau. Needs steps m-1 and m+1, hence
    tau >= 2 dtau and one step of lookahead.
    """
    if result.cfg.form != W_FORM:
        raise ValueError("the identity check runs on w-form results")
    last = result.n_recorded - 1
    if m < 2 or m + 1 > last:
        raise ValueError(
            f"residual at step {m} needs tau >= 2*dtau and one step beyond; have 0..{last}"
        )
    cfg = result.cfg
    kernel = cfg.kernel
    dtau = cfg.dtau
    dx = cfg.grid.dx
    grads = result.gradients
    if history is None:
        history = history_series(result)
    if rates is None:
        rates = rate_series(result)

    tau = m * dtau
    mem = memory_convolution(kernel, dtau, result.laplacians[: m + 1], 0.5)
    lhs = integrate(mem * rates[m], cfg.grid)

    def gw(j: int) -> float:
        return integrate_cells(grads[j] ** 2, cfg.grid)

    dm = [kernel.damped_mass(j * dtau) for j in (m - 1, m, m + 1)]
    gws = [gw(j) for j in (m - 1, m, m + 1)]

    diff = grads[: m + 1] - grads[m]
    gd = dx * np.einsum("ij,ij->i", diff, diff)
    lags = dtau * np.arange(m, -1, -1, dtype=float)
    wts = np.exp(-0.5 * lags) * np.asarray(kernel.dmu(lags))
    wts[0] *= 0.5
    wts[-1] *= 0.5
    dmu_term = dtau * float(wts @ gd)

    r1 = 0.5 * (history[m + 1] - history[m - 1]) / (2.0 * dtau)
    r2 = -0.5 * (dm[2] * gws[2] - dm[0] * gws[0]) / (2.0 * dtau)
    r3 = -0.5 * dmu_term
    r4 = 0.5 * (0.5 * dm[1] + math.exp(-0.5 * tau) * float(kernel.mu(tau))) * gws[1]
    r5 = 0.25 * history[m]
    r6 = -0.25 * dm[1] * gws[1]
    rhs = r1 + r2 + r3 + r4 + r5 + r6
    return abs(lhs - rhs) / (1.0 + abs(lhs))


def memory_identity_residual_series(
    result: RunResult,
    history: np.ndarray | None = None,
) -> np.ndarray:
    """Residual at every step where the stencil exists, NaN elsewhere."""
    out = np.full(result.n_recorded, np.nan)
    if result.cfg.form != W_FORM:
        return out
    if history is None:
        history = history_series(result)
    rates = rate_series(result)
    for m in range(2, result.n_recorded - 1):
        out[m] = memory_identity_residual(result, m, history, rates)
    return out


@dataclass(frozen=True, eq=False)
class ConcavityReport:
    """J = A^{-k} along a run and the window used to judge its shape.

    Sample m is windowed when it sits past the leading transient_frac of the
    recorded span, the sup-norm is at most sup_cap (the terminal overshoot
    right before threshold crossing is not evidence about J's shape), and
    both centered derivatives exist. Curvature within neutral_band of zero
    is counted as neither concave nor convex.
    """

    taus: np.ndarray
    j: np.ndarray
    dj: np.ndarray
    d2j: np.ndarray
    k: float
    windowed: np.ndarray
    fraction_concave: float
    decreasing: bool
    root_estimate: float | None
    n_valid: int


def concavity_report(
    taus: np.ndarray,
    a_series: np.ndarray,
    sup_norms: np.ndarray,
    p: float,
    transient_frac: float = 0.05,
    sup_cap: float = CALM_SUP_CAP,
    neutral_band_factor: float = 1e-10,
) -> ConcavityReport:
    """Shape analysis of J = A^{-(p-1)/4}; truncates at the first invalid A."""
    k = 0.25 * (p - 1.0)
    a = np.asarray(a_series, dtype=float)
    bad = ~(np.isfinite(a) & (a > 0.0))
    n_valid = int(np.argmax(bad)) if bad.any() else a.size
    j = np.full(a.size, np.nan)
    dj = np.full(a.size, np.nan)
    d2j = np.full(a.size, np.nan)
    if n_valid:
        j[:n_valid] = a[:n_valid] ** (-k)
    dtau = float(taus[1] - taus[0]) if taus.size > 1 else 1.0
    if n_valid >= 3:
        jj = j[:n_valid]
        dj[1 : n_valid - 1] = (jj[2:] - jj[:-2]) / (2.0 * dtau)
        d2j[1 : n_valid - 1] = (jj[2:] - 2.0 * jj[1:-1] + jj[:-2]) / dtau**2

    windowed = np.zeros(a.size, dtype=bool)
    if n_valid >= 3:
        span = taus[n_valid - 1] - taus[0]
        cut = taus[0] + transient_frac * span
        idx = np.arange(1, n_valid - 1)
        windowed[idx] = (taus[idx] >= cut) & (np.asarray(sup_norms)[idx] <= sup_cap)

    band = 0.0
    if windowed.any():
        band = neutral_band_factor * float(np.max(np.abs(j[windowed])))
    curv = d2j[windowed]
    decisive = np.abs(curv) > band
    if decisive.any():
        fraction = float(np.sum(curv[decisive] < 0.0) / np.sum(decisive))
    else:
        fraction = 1.0  # nothing decisively curved; vacuously concave
    decreasing = bool(windowed.any() and np.all(dj[windowed] < 0.0))

    root = None
    if n_valid >= 2 and j[n_valid - 1] < j[n_valid - 2]:
        j1, j2 = j[n_valid - 2], j[n_valid - 1]
        t1, t2 = taus[n_valid - 2], taus[n_valid - 1]
        root = float(t2 + j2 * (t2 - t1) / (j1 - j2))
    return ConcavityReport(
        taus=np.asarray(taus, dtype=float).copy(),
        j=j,
        dj=dj,
        d2j=d2j,
        k=k,
        windowed=windowed,
        fraction_concave=fraction,
        decreasing=decreasing,
        root_estimate=root,
        n_valid=n_valid,
    )


def diagnostics_table(result: RunResult) -> dict[str, np.ndarray]:
    """All diagnostic columns for a run, keyed and ordered per the CSV schema."""
    series_hist = history_series(result)
    series = energy_series(result, series_hist)
    a = l2_series(result)
    report = concavity_report(result.taus, a, result.sup_norms, result.cfg.p)

    j_col = np.where(np.isfinite(report.j), report.j, 0.0)
    j_col[a <= 0.0] = 0.0

    pot = series.potential
    dtau = result.cfg.dtau
    cum = np.concatenate(([0.0], np.cumsum(0.5 * dtau * (pot[1:] + pot[:-1]))))
    l_col = 0.5 * cum
    f_col = series.kinetic + series.elastic + series.history - series.mass

    resid = memory_identity_residual_series(result, series_hist)

    table = {
        "tau": result.taus.copy(),
        "sup_norm": result.sup_norms.copy(),
        "A": a,
        "J": j_col,
        "dJ": report.dj.copy(),
        "d2J": report.d2j.copy(),
        "E_w": series.e_w,
        "kinetic": series.kinetic,
        "elastic": series.elastic,
        "history": series.history,
        "mass": series.mass,
        "potential": series.potential,
        "L": l_col,
        "F": f_col,
        "lemma1_residual": resid,
    }
    if float(np.max(result.sup_norms)) == 0.0:
        # A zero field has every functional identically zero; the NaN slots
        # only mark missing stencils, which estimate nothing here.
        for key in ("dJ", "d2J", "lemma1_residual"):
            table[key] = np.zeros_like(table[key])
    return {name: table[name] for name in DIAGNOSTIC_COLUMNS}


@dataclass(frozen=True)
class InvariantRow:
    name: str
    measured: float
    tolerance: float
    passed: bool


def _tol_second_order(cfg, scale: float) -> float:
    return 5.0 * (1.0 + abs(scale)) * (cfg.dtau**2 + cfg.grid.dx**2)


def run_invariant_suite(result: RunResult) -> list[InvariantRow]:
    """Measured-versus-tolerance rows for the verify command.

    Regime-conditional rows (horizon bound, growth floor) appear only when
    the data satisfies the matching hypotheses.
    """
    from efviz import predictors

    cfg = result.cfg
    hist = history_series(result)
    series = energy_series(result, hist)
    rows: list[InvariantRow] = []

    total_gap = float(
        np.max(
            np.abs(
                series.total
                - (series.kinetic + series.elastic + series.history - series.mass - series.potential)
            )
        )
    )
    scale = 1.0 + float(np.max(np.abs(series.total)))
    rows.append(InvariantRow("energy_total_is_component_sum", total_gap, 1e-12 * scale,
                             total_gap <= 1e-12 * scale))

    # Decay statements are facts about the resolved part of the flow; rows
    # on the way into a blow-up carry unbounded truncation error, so they
    # are windowed out rather than folded into the tolerance. Two cuts: the
    # stepper must resolve the nonlinear frequency (else the error is not
    # even O(dtau^2)), and the field must stay moderate (else the error
    # constant, which grows with the amplitude, outruns any fixed scale as
    # the window deepens under refinement).
    sup = np.asarray(result.sup_norms, dtype=float)
    omega = math.sqrt(cfg.p) * np.exp(0.25 * (cfg.p - 1.0) * result.taus)
    omega = omega * np.maximum(sup, 0.0) ** (0.5 * (cfg.p - 1.0))
    sup_cap = max(10.0, 2.0 * float(sup[0]))
    calm = (cfg.dtau * omega <= RESOLVED_PHASE_LIMIT) & (sup <= sup_cap)
    n_calm = int(np.argmax(~calm)) if not calm.all() else calm.size
    calm_series = EnergySeries(
        taus=series.taus[:n_calm],
        kinetic=series.kinetic[:n_calm],
        elastic=series.elastic[:n_calm],
        history=series.history[:n_calm],
        mass=series.mass[:n_calm],
        potential=series.potential[:n_calm],
    )

    if n_calm >= 2:
        comp_scale = float(
            np.max(
                np.abs(calm_series.kinetic)
                + np.abs(calm_series.elastic)
                + np.abs(calm_series.history)
                + np.abs(calm_series.mass)
                + np.abs(calm_series.potential)
            )
        )
        tol = _tol_second_order(cfg, comp_scale)
        jump = energy_monotonicity_report(calm_series)
        rows.append(InvariantRow("energy_nonincreasing", jump, tol, jump <= tol))

        # The budget accumulates local truncation over the whole window, so
        # its constant is looser than the pointwise rows'.
        budget_tol = 12.0 * (1.0 + comp_scale) * (cfg.dtau**2 + cfg.grid.dx**2)
        excess = dissipation_bound_check(calm_series, cfg.p)
        rows.append(InvariantRow("dissipation_budget", excess, budget_tol, excess <= budget_tol))

    coeff_floor = float(np.min([1.0 - cfg.kernel.damped_mass(t) for t in result.taus]))
    rows.append(InvariantRow("elastic_coefficient_floor", coeff_floor, cfg.kernel.ell - 1e-12,
                             coeff_floor >= cfg.kernel.ell - 1e-12))

    if cfg.form == W_FORM and result.n_recorded >= 4:
        resid = memory_identity_residual_series(result, hist)
        # The residual at row m reads row m + 1 through the centered rate,
        # so the window stops one row before the calm prefix does.
        usable = np.zeros(resid.size, dtype=bool)
        usable[: max(0, n_calm - 1)] = True
        usable &= np.isfinite(resid)
        if usable.any():
            worst = float(np.max(resid[usable]))
            rtol = max(1e-3, 5.0 * cfg.dtau)
            rows.append(InvariantRow("memory_identity_residual", worst, rtol, worst <= rtol))

    a = l2_series(result)
    report = concavity_report(result.taus, a, result.sup_norms, cfg.p)
    if report.n_valid:
        k = report.k
        recomputed = a[: report.n_valid] ** (-k)
        j_gap = float(np.max(np.abs(report.j[: report.n_valid] - recomputed)))
        j_scale = 1e-12 * (1.0 + float(np.max(recomputed)))
        rows.append(InvariantRow("j_matches_a_power", j_gap, j_scale, j_gap <= j_scale))

    regime = predictors.classify_regime(cfg.u0, cfg.u1, cfg.grid, cfg.p, cfg.power_mode)
    if result.blew_up() and regime.regime == "theorem31":
        horizon = predictors.blowup_horizon(cfg.u0, cfg.u1, cfg.p, cfg.grid)
        ratio = result.tau_b / horizon.tau_bound
        rows.append(InvariantRow("blowup_within_horizon_bound", ratio, 1.1, ratio <= 1.1))
    if regime.regime == "theorem41":
        floor = predictors.growth_floor(cfg.u0, regime.e_w0, cfg.p, result.taus, cfg.grid)
        ok = a >= 0.98 * floor
        worst = float(np.min(a - 0.98 * floor))
        rows.append(InvariantRow("growth_floor_respected", worst, 0.0, bool(ok.all())))
    return rows
