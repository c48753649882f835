"""Relaxation kernels for the memory term.

A kernel mu(s) >= 0 must be nonincreasing and have exponentially weighted mass
integral(e^{s/2} mu(s) ds, 0, inf) strictly below 1; the defect

    ell = 1 - integral(e^{s/2} mu(s) ds, 0, inf)

is the residual stiffness of the material and must stay positive. Two families
are supported: finite sums of decaying exponentials (closed-form masses, O(1)
per-step convolution via recurrences) and tabulated samples (piecewise linear,
zero beyond the last sample). The zero kernel is accepted with ell = 1.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class KernelAdmissibilityError(ValueError):
    """Raised when a kernel description violates an admissibility clause."""


def _exp_sum_mass(terms, tau, rate):
    """integral(e^{rate*s} * sum a_i e^{-b_i s} ds, 0, tau), tau may be inf."""
    total = 0.0
    for a, b in terms:
        d = b - rate
        if d <= 0.0:
            return math.inf
        if math.isinf(tau):
            total += a / d
        else:
            total += a * (1.0 - math.exp(-d * tau)) / d
    return total


def _segment_mass(s0, s1, m0, m1, rate):
    """Exact integral(e^{rate*s}(alpha + beta*s) ds, s0, s1) for the chord."""
    beta = (m1 - m0) / (s1 - s0)
    alpha = m0 - beta * s0

    def anti(s):
        return math.exp(rate * s) * ((alpha + beta * s) / rate - beta / rate**2)

    return anti(s1) - anti(s0)


@dataclass(frozen=True)
class RelaxationKernel:
    """Validated memory kernel. Construct via exponential_sum, tabulated or null."""

    family: str
    terms: tuple[tuple[float, float], ...] = ()
    knots: np.ndarray | None = None
    values: np.ndarray | None = None
    ell: float = field(default=1.0)

    @classmethod
    def exponential_sum(cls, terms) -> "RelaxationKernel":
        """Kernel mu(s) = sum a_i exp(-b_i s).

        Every coefficient a_i must be nonnegative and every rate b_i must
        exceed 1/2, otherwise the weighted mass diverges. Zero-coefficient
        terms are dropped; an empty sum is the zero kernel.
        """
        clean = []
        for a, b in terms:
            a, b = float(a), float(b)
            if not (math.isfinite(a) and math.isfinite(b)):
                raise KernelAdmissibilityError("kernel term is not finite")
            if a < 0.0:
                raise KernelAdmissibilityError(
                    f"coefficient {a} is negative; kernel must be nonnegative and nonincreasing"
                )
            if a == 0.0:
                continue
            if b <= 0.5:
                raise KernelAdmissibilityError(
                    f"decay rate {b} <= 1/2: weighted mass integral(e^(s/2) mu) diverges"
                )
            clean.append((a, b))
        mass = _exp_sum_mass(clean, math.inf, 0.5)
        if mass >= 1.0:
            raise KernelAdmissibilityError(
                f"weighted mass integral(e^(s/2) mu) = {mass:.6g} >= 1; kernel too strong"
            )
        return cls(family="exponential_sum", terms=tuple(clean), ell=1.0 - mass)

    @classmethod
    def tabulated(cls, s, mu) -> "RelaxationKernel":
        """Piecewise-linear kernel through samples (s_k, mu_k), zero beyond s_max.

        Samples must start at s = 0, increase strictly in s, and be
        nonnegative and nonincreasing in mu.
        """
        s = np.asarray(s, dtype=float)
        mu = np.asarray(mu, dtype=float)
        if s.ndim != 1 or s.shape != mu.shape or s.size < 2:
            raise KernelAdmissibilityError("tabulated kernel needs matching 1-d arrays, >= 2 samples")
        if not (np.isfinite(s).all() and np.isfinite(mu).all()):
            raise KernelAdmissibilityError("tabulated kernel samples must be finite")
        if s[0] != 0.0 or np.any(np.diff(s) <= 0.0):
            raise KernelAdmissibilityError("sample times must start at 0 and increase strictly")
        if np.any(mu < 0.0):
            raise KernelAdmissibilityError("kernel values must be nonnegative")
        if np.any(np.diff(mu) > 0.0):
            raise KernelAdmissibilityError("kernel values must be nonincreasing")
        if np.all(mu == 0.0):
            return cls.null()
        mass = sum(
            _segment_mass(s[k], s[k + 1], mu[k], mu[k + 1], 0.5) for k in range(s.size - 1)
        )
        if mass >= 1.0:
            raise KernelAdmissibilityError(
                f"weighted mass integral(e^(s/2) mu) = {mass:.6g} >= 1; kernel too strong"
            )
        # The lifted profile e^{s/2} mu(s) may locally increase even for an
        # admissible kernel; only note it, nothing downstream requires more.
        slope = np.diff(mu) / np.diff(s)
        if np.any(0.5 * mu[:-1] + slope > 0.0) or np.any(0.5 * mu[1:] + slope > 0.0):
            log.debug("lifted profile e^(s/2)*mu(s) increases on some segment")
        return cls(family="tabulated", knots=s.copy(), values=mu.copy(), ell=1.0 - mass)

    @classmethod
    def null(cls) -> "RelaxationKernel":
        return cls(family="exponential_sum", terms=(), ell=1.0)

    @property
    def is_null(self) -> bool:
        if self.family == "exponential_sum":
            return not self.terms
        return False

    def mu(self, s):
        """Kernel value at lag s (scalar or array)."""
        s = np.asarray(s, dtype=float)
        if self.family == "exponential_sum":
            out = np.zeros_like(s)
            for a, b in self.terms:
                out = out + a * np.exp(-b * s)
        else:
            out = np.interp(s, self.knots, self.values, right=0.0)
        return out if out.ndim else float(out)

    def dmu(self, s):
        """Derivative of the kernel at lag s; piecewise slope for tabulated."""
        s = np.asarray(s, dtype=float)
        if self.family == "exponential_sum":
            out = np.zeros_like(s)
            for a, b in self.terms:
                out = out - a * b * np.exp(-b * s)
        else:
            slopes = np.diff(self.values) / np.diff(self.knots)
            idx = np.clip(np.searchsorted(self.knots, s, side="right") - 1, 0, slopes.size - 1)
            out = np.where(s < self.knots[-1], slopes[idx], 0.0)
        return out if out.ndim else float(out)

    def _mass(self, tau, rate):
        if tau < 0.0:
            raise ValueError("negative integration horizon")
        if self.family == "exponential_sum":
            return _exp_sum_mass(self.terms, tau, rate)
        hi = min(tau, float(self.knots[-1]))
        total = 0.0
        for k in range(self.knots.size - 1):
            a, b = self.knots[k], self.knots[k + 1]
            if a >= hi:
                break
            b = min(b, hi)
            ma = float(np.interp(a, self.knots, self.values))
            mb = float(np.interp(b, self.knots, self.values))
            total += _segment_mass(a, b, ma, mb, rate)
        return total

    def weighted_mass(self, tau) -> float:
        """integral(e^{s/2} mu(s) ds, 0, tau); tau = inf gives 1 - ell."""
        return self._mass(float(tau), 0.5)

    def damped_mass(self, tau) -> float:
        """integral(e^{-s/2} mu(s) ds, 0, tau), the effective-kernel mass.

        This weights each lag by the amplitude decay it has experienced and
        is the coefficient drained from the elastic term in the energy.
        """
        return self._mass(float(tau), -0.5)

    def describe(self) -> dict:
        """JSON-friendly echo of the kernel."""
        if self.family == "exponential_sum":
            return {"type": "expsum", "terms": [list(t) for t in self.terms], "l": self.ell}
        return {
            "type": "tabulated",
            "s": self.knots.tolist(),
            "mu": self.values.tolist(),
            "l": self.ell,
        }
