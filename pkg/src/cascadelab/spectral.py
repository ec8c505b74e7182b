"""Exact spectral layer: increment laws and their structure functions.

The increment law xi drives everything downstream.  This module keeps the
closed-form side: the log-moment scaling function phi(s) = -log2 E[e^{s xi}],
its complement phi_tilde = 1 - phi, the structure exponent tau = phi - 1,
Legendre transforms, the dimension-change equation and the moment-blowup
root q_beta.  All functions here are pure and cheap; they serve both as
production formulas and as oracles for the Monte Carlo layers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

LOG2 = math.log(2.0)
CRITICAL_MEAN = -2.0 * LOG2
CRITICAL_VAR = 2.0 * LOG2
CRITICAL_STD = math.sqrt(CRITICAL_VAR)


class SpectralError(ValueError):
    """Domain or solvability failure in a spectral computation."""


class Kind(enum.Enum):
    GAUSSIAN_CRITICAL = "gaussian-critical"
    GAUSSIAN_SHIFTED = "gaussian-shifted"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class SpectralModel:
    """The law of the per-edge increment xi.

    GAUSSIAN_CRITICAL fixes xi ~ N(-2 log 2, 2 log 2), the normalization
    with E e^xi = 1/2 and E xi e^xi = 0.  GAUSSIAN_SHIFTED is a free
    Gaussian N(mean, variance).  DEGENERATE is the constant c stub used by
    deterministic tests.
    """

    kind: Kind
    mean: float = CRITICAL_MEAN
    variance: float = CRITICAL_VAR

    @staticmethod
    def gaussian_critical() -> "SpectralModel":
        return SpectralModel(Kind.GAUSSIAN_CRITICAL, CRITICAL_MEAN, CRITICAL_VAR)

    @staticmethod
    def gaussian(mean: float, variance: float) -> "SpectralModel":
        if variance <= 0:
            raise SpectralError("variance must be positive")
        return SpectralModel(Kind.GAUSSIAN_SHIFTED, mean, variance)

    @staticmethod
    def degenerate(c: float) -> "SpectralModel":
        return SpectralModel(Kind.DEGENERATE, c, 0.0)

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def log_mgf(self, s: float) -> float:
        """log E[e^{s xi}]; finite for all s for the supported kinds."""
        return s * self.mean + 0.5 * s * s * self.variance

    def log_mgf_deriv(self, s: float) -> float:
        return self.mean + s * self.variance


@dataclass(frozen=True)
class LegendrePoint:
    """One point of the Legendre transform: value = argmin_t * gamma - tau(argmin_t)."""

    gamma: float
    value: float
    argmin_t: float


def phi(model: SpectralModel, s: float) -> float:
    """Log-moment scaling function -log2 E[e^{s xi}]."""
    val = -model.log_mgf(s) / LOG2
    if not math.isfinite(val):
        raise SpectralError(f"moment generating function diverges at s={s}")
    return val


def phi_tilde(model: SpectralModel, s: float) -> float:
    return 1.0 - phi(model, s)


def tau(model: SpectralModel, s: float) -> float:
    return phi(model, s) - 1.0


def _phi_deriv(model: SpectralModel, s: float) -> float:
    return -model.log_mgf_deriv(s) / LOG2


def tau_star(model: SpectralModel, gamma: float) -> LegendrePoint:
    """Legendre transform inf_t (t*gamma - tau(t)).

    For Gaussian models the infimum is solved exactly from the quadratic;
    the degenerate stub has a linear tau, so the infimum is finite only at
    the single admissible slope.
    """
    if not (gamma >= 0 and math.isfinite(gamma)):
        raise SpectralError("gamma must be finite and nonnegative")
    if model.variance > 0:
        # d/dt [t*gamma - tau(t)] = gamma - tau'(t); tau' affine in t.
        t_opt = (-gamma * LOG2 - model.mean) / model.variance
        t_opt = _newton_polish(model, gamma, t_opt)
        value = t_opt * gamma - tau(model, t_opt)
        return LegendrePoint(gamma, value, t_opt)
    slope = -model.mean / LOG2  # tau'(t) for the degenerate stub
    if abs(gamma - slope) > 1e-12:
        raise SpectralError("Legendre transform unbounded below for degenerate model")
    return LegendrePoint(gamma, -tau(model, 0.0), 0.0)


def _newton_polish(model: SpectralModel, gamma: float, t0: float, steps: int = 4) -> float:
    # Solve gamma = tau'(t); second derivative of the objective is
    # -tau'' = variance/log2 > 0.
    t = t0
    for _ in range(steps):
        g = gamma - _phi_deriv(model, t)
        h = model.variance / LOG2
        t = t - g / h
    return t


def tau_star_grid(model: SpectralModel, gammas: np.ndarray) -> np.ndarray:
    return np.array([tau_star(model, g).value for g in np.asarray(gammas, dtype=float)])


def tau_alpha(model: SpectralModel, alpha: float, s: float) -> float:
    """Structure exponent of a measure subordinated at stability index alpha."""
    if not 0.0 < alpha < 1.0:
        raise SpectralError("alpha must lie in (0, 1)")
    return min(tau(model, s / alpha), 0.0)


def tau_alpha_star(model: SpectralModel, alpha: float, gamma: float,
                   t_max: float = 64.0) -> float:
    """Legendre transform of tau_alpha, by dense minimization over t >= 0.

    The plateau min(., 0) makes the transform piecewise: linear with slope
    alpha near gamma = 0, then strictly concave.
    """
    ts = np.linspace(0.0, t_max, 4097)
    vals = ts * gamma - np.array([tau_alpha(model, alpha, t) for t in ts])
    return float(vals.min())


def kpz_solve(model: SpectralModel, zeta0: float, tol: float = 1e-12) -> float:
    """Solve zeta0 = phi(zeta) for zeta in [0, 1] by monotone bisection.

    Requires phi increasing on [0, 1] with phi(0) = 0 <= zeta0 <= phi(1).
    """
    if not 0.0 <= zeta0 <= 1.0:
        raise SpectralError("zeta0 must lie in [0, 1]")
    if _phi_deriv(model, 0.0) < 0 or phi(model, 1.0) < zeta0 - 1e-15:
        raise SpectralError("phi is not increasing onto [0, zeta0] for this model")
    if zeta0 == 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    top = phi(model, hi)
    if zeta0 >= top - 1e-15:
        # At the right endpoint phi may be critical (zero slope), where
        # bisection cannot resolve the inverse; the solution is hi itself.
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if phi(model, mid) < zeta0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def kpz_dual(model: SpectralModel, zeta0: float, alpha: float) -> float:
    """Dimension under the subordinated measure: alpha times the base solution."""
    if not 0.0 < alpha < 1.0:
        raise SpectralError("alpha must lie in (0, 1)")
    return alpha * kpz_solve(model, zeta0)


def q_beta(model: SpectralModel, beta: float, tol: float = 1e-12) -> float:
    """Moment blowup order: the root q > 1 of phi_tilde(beta q) - q phi_tilde(beta).

    q = 1 is always a root; the one returned here is the second, which
    exists for beta in (0, 1) whenever phi_tilde is strictly convex.
    """
    if not 0.0 < beta < 1.0:
        raise SpectralError("beta must lie in (0, 1)")

    def g(q: float) -> float:
        return phi_tilde(model, beta * q) - q * phi_tilde(model, beta)

    # Expand until g > 0; g(1) = 0 and g dips negative before the root.
    hi = 2.0
    while g(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e9:
            raise SpectralError(f"no moment blowup root q > 1 for beta={beta}")
    lo = 1.0 + 1e-9
    if g(lo) >= 0.0:
        # Roots merged at criticality from the right side.
        raise SpectralError(f"no root q > 1 distinct from 1 for beta={beta}")
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    q = 0.5 * (lo + hi)
    # Newton polish: the bracket alone leaves ~|q| * tol absolute error
    for _ in range(3):
        gp = beta * _phi_deriv(model, beta * q) * (-1.0) - phi_tilde(model, beta)
        if gp == 0.0:
            break
        q = q - g(q) / gp
    return q
