"""Uniform 1-D grid, difference operators and memory-term quadrature.

All field arrays hold interior node values only; homogeneous Dirichlet
boundaries enter as zero ghost values. The staggered gradient and the cell
sum below satisfy summation by parts against the Laplacian exactly, so the
discrete energy identities hold to time-discretization error alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from efviz.kernel import RelaxationKernel


@dataclass(frozen=True)
class Grid1D:
    """Interval (r1, r2) with n interior nodes, spacing dx = (r2-r1)/(n+1)."""

    r1: float
    r2: float
    n: int

    def __post_init__(self):
        if not (self.r2 > self.r1):
            raise ValueError(f"empty interval ({self.r1}, {self.r2})")
        if self.n < 2:
            raise ValueError("need at least 2 interior nodes")

    @property
    def dx(self) -> float:
        return (self.r2 - self.r1) / (self.n + 1)

    @cached_property
    def x(self) -> np.ndarray:
        """Interior node coordinates."""
        return np.linspace(self.r1, self.r2, self.n + 2)[1:-1]

    @property
    def width(self) -> float:
        return self.r2 - self.r1

    @property
    def narrow(self) -> bool:
        """Interval width at most 1, the narrowness hypothesis of the bounds."""
        return 0.0 < self.width <= 1.0

    def refine(self) -> "Grid1D":
        """Halve dx exactly: n -> 2n + 1 keeps every old node."""
        return Grid1D(self.r1, self.r2, 2 * self.n + 1)


def _check_nodal(f: np.ndarray, grid: Grid1D) -> None:
    if f.shape[-1] != grid.n:
        raise ValueError(
            f"field carries {f.shape[-1]} values for a grid with {grid.n} interior nodes"
        )


def second_derivative(f: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Three-point Laplacian with zero Dirichlet ghost values."""
    _check_nodal(f, grid)
    out = -2.0 * f.astype(float, copy=True)
    out[:-1] += f[1:]
    out[1:] += f[:-1]
    return out / grid.dx**2


def staggered_gradient(f: np.ndarray, grid: Grid1D) -> np.ndarray:
    """First differences at the n+1 cell midpoints, zero ghosts at both ends."""
    _check_nodal(f, grid)
    g = np.empty(f.size + 1)
    g[0] = f[0]
    g[1:-1] = f[1:] - f[:-1]
    g[-1] = -f[-1]
    return g / grid.dx


def integrate(f: np.ndarray, grid: Grid1D, left: float = 0.0, right: float = 0.0) -> float:
    """Trapezoid rule over the full interval with explicit boundary values."""
    _check_nodal(f, grid)
    return grid.dx * (0.5 * left + float(np.sum(f)) + 0.5 * right)


def integrate_cells(g: np.ndarray, grid: Grid1D) -> float:
    """Sum of cell values times dx, for arrays on the staggered midpoints."""
    if g.shape[-1] != grid.n + 1:
        raise ValueError(
            f"cell array carries {g.shape[-1]} values for a grid with {grid.n + 1} cells"
        )
    return grid.dx * float(np.sum(g))


def lp_norm(f: np.ndarray, grid: Grid1D, p: float) -> float:
    """Dirichlet L^p norm via the trapezoid rule (boundary terms vanish)."""
    if p == math.inf:
        return float(np.max(np.abs(f))) if f.size else 0.0
    return integrate(np.abs(f) ** p, grid) ** (1.0 / p)


def memory_convolution(
    kernel: RelaxationKernel,
    dtau: float,
    history: np.ndarray,
    source_rate: float = 0.5,
) -> np.ndarray:
    """Damped memory term at the latest history row, composite trapezoid.

    history holds rows G(s_j) for s_j = j*dtau, j = 0..m, and the result is

        M(tau_m) = integral(e^{-c(tau_m - s)} mu(tau_m - s) G(s) ds, 0, tau_m)

    with c = source_rate. Writing the weight on the lag keeps every factor
    bounded by mu(0) regardless of tau. Works for any kernel family; the
    recurrence in MemoryAccumulator reproduces this sum exactly for
    exponential kernels at O(1) cost per step.
    """
    m = history.shape[0] - 1
    if m <= 0:
        return np.zeros(history.shape[-1])
    lags = dtau * np.arange(m, -1, -1, dtype=float)
    weights = np.exp(-source_rate * lags) * np.asarray(kernel.mu(lags))
    weights[0] *= 0.5
    weights[-1] *= 0.5
    return dtau * (weights @ history)


class MemoryAccumulator:
    """Streaming memory term for exponential-sum kernels.

    Per mode (a, b) the damped partial integral

        q_m = integral(e^{-(b+c)(tau_m - s)} G(s) ds, 0, tau_m)

    obeys q_m = d*q_{m-1} + (dtau/2)*(d*G_{m-1} + G_m) with d = e^{-(b+c)dtau},
    which is the composite trapezoid sum telescoped. The memory term is then
    sum_i a_i q_i, identical to memory_convolution to rounding.
    """

    def __init__(self, kernel: RelaxationKernel, dtau: float, size: int, source_rate: float = 0.5):
        if kernel.family != "exponential_sum":
            raise ValueError("recurrence path needs an exponential-sum kernel")
        self._coeffs = np.array([a for a, _ in kernel.terms])
        self._decay = np.array([math.exp(-(b + source_rate) * dtau) for _, b in kernel.terms])
        self._q = np.zeros((len(kernel.terms), size))
        self._half_dtau = 0.5 * dtau
        self._prev: np.ndarray | None = None

    def push(self, g: np.ndarray) -> np.ndarray:
        """Append G(tau_m) and return the memory term at tau_m."""
        if self._prev is not None and self._coeffs.size:
            d = self._decay[:, None]
            self._q = d * self._q + self._half_dtau * (d * self._prev[None, :] + g[None, :])
        self._prev = np.asarray(g, dtype=float).copy()
        if not self._coeffs.size:
            return np.zeros_like(self._prev)
        return self._coeffs @ self._q
