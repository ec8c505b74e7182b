"""Gaussian smoothing-recursion iteration with traveling-front tracking.

One step squares the profile pointwise and convolves with a standard
Gaussian kernel; iterated from monotone [0,1]-valued initial data the
profile travels right at an asymptotically constant speed with a
logarithmic correction whose coefficient depends on the initial tail
class.  The window recenters itself by whole grid cells so the front stays
resolved; recorded front positions are absolute.

Internally the iteration runs on the complement eps = 1 - G, for which one
step reads eps' = rho * (2 eps - eps^2) exactly.  Storing G itself would
floor the right tail at machine epsilon a few dozen units ahead of the
front - an artificial absorbing wall that drags the speed of slow-tailed
data and wipes out the logarithmic corrections.  In eps form the tail
stays resolved down to ~1e-300.

Two further numerical notes: the lattice sum used for the convolution is
spectrally accurate for smooth profiles, and step-function initial data
(which sampling alone would misplace by half a cell) takes its first step
in closed form, since the squared step is itself and its Gaussian
smoothing is the normal CDF.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import erfc
from scipy.stats import linregress

SQRT2LOG2 = math.sqrt(2.0 * math.log(2.0))
KERNEL_CUTOFF = 8.0
MONOTONE_TOL = 1e-12
EDGE_LO, EDGE_HI = 0.05, 0.95


class WaveError(ValueError):
    pass


class FrontEscapeError(WaveError):
    pass


@dataclass(frozen=True)
class Grid:
    origin: float
    dx: float
    size: int

    def __post_init__(self):
        if not 0.005 <= self.dx <= 0.1:
            raise WaveError("dx must lie in [0.005, 0.1]")
        if self.size * self.dx < 60:
            raise WaveError("window must span at least 60 units")

    def xs(self) -> np.ndarray:
        return self.origin + self.dx * np.arange(self.size)


def default_grid(dx: float = 0.02, width: float = 80.0) -> Grid:
    """Window [-width/3, 2 width/3]: the long side faces the advancing front.

    The origin snaps to the lattice so that x = 0 is a grid point (step
    initial data jumps exactly at zero).
    """
    size = int(round(width / dx)) + 1
    return Grid(-round(width / (3.0 * dx)) * dx, dx, size)


@dataclass
class WaveProfile:
    """Monotone [0,1] profile on a uniform grid; `tail` holds 1 - values."""

    grid: Grid
    tail: np.ndarray
    alpha_tag: float
    n: int = 0
    jump_x: Optional[float] = None  # set only for exact step-function data

    def __post_init__(self):
        t = self.tail
        if len(t) != self.grid.size:
            raise WaveError("tail length must match the grid")
        if t[0] <= 1.0 - EDGE_LO or t[-1] >= 1.0 - EDGE_HI:
            raise FrontEscapeError("front is not well inside the window")
        if np.any(t < 0) or np.any(t > 1) or np.any(np.diff(t) > MONOTONE_TOL):
            raise WaveError("profile must be monotone with values in [0, 1]")

    @property
    def values(self) -> np.ndarray:
        return 1.0 - self.tail

    def xs(self) -> np.ndarray:
        return self.grid.xs()


def init_profile(alpha: float, grid: Grid | None = None) -> WaveProfile:
    """Initial data exp(-e^{-alpha x}); alpha = inf gives the unit step at 0."""
    if grid is None:
        grid = default_grid()
    x = grid.xs()
    if math.isinf(alpha):
        tail = (x < 0).astype(float)
        return WaveProfile(grid, tail, alpha, 0, 0.0)
    if alpha <= 0:
        raise WaveError("alpha must be positive")
    with np.errstate(over="ignore"):
        tail = -np.expm1(-np.exp(-alpha * x))
    tail[~np.isfinite(tail)] = 1.0
    return WaveProfile(grid, tail, alpha, 0, None)


def init_from_total_mass(beta: float, y1_samples: np.ndarray,
                         grid: Grid | None = None) -> WaveProfile:
    """Empirical Laplace-transform profile of critical total-mass samples:
    G0(x) = (mean_j exp(-e^{-beta c x} Y_j^beta))^{1/2}, c = sqrt(2 log 2)."""
    if beta <= 1:
        raise WaveError("beta must exceed 1")
    y = np.asarray(y1_samples, dtype=float)
    y = y[y > 0]
    if len(y) < 1000:
        raise WaveError(f"need at least 1000 positive samples, got {len(y)}")
    if grid is None:
        grid = default_grid()
    x = grid.xs()
    logt = -beta * SQRT2LOG2 * x
    yb = y ** beta
    tail = np.empty(grid.size)
    chunk = max(1, (1 << 22) // len(y))
    for i in range(0, grid.size, chunk):
        lt = logt[i:i + chunk]
        t = np.exp(np.minimum(lt, 709.0))
        # mean of 1 - e^{-t Y^beta}, accurate for small t
        m1 = -np.expm1(-t[:, None] * yb[None, :]).mean(axis=1)
        m1[lt > 709.0] = 1.0
        # 1 - sqrt(1 - m1) without cancellation
        with np.errstate(divide="ignore"):
            tail[i:i + chunk] = -np.expm1(0.5 * np.log1p(-np.minimum(m1, 1.0)))
    tail[logt > 709.0] = 1.0
    return WaveProfile(grid, tail, beta * SQRT2LOG2, 0, None)


def _kernel(dx: float) -> np.ndarray:
    taps = int(round(KERNEL_CUTOFF / dx))
    y = dx * np.arange(-taps, taps + 1)
    w = np.exp(-0.5 * y * y)
    return w / w.sum()


def _recenter(grid: Grid, tail: np.ndarray, n: int, alpha: float,
              jump: Optional[int]) -> WaveProfile:
    # Rest position is the left edge of the middle third: slow-decaying
    # tails ahead of the front need the longest possible intact span, and
    # the wake behind the front dies off much faster.
    size = grid.size
    c = size - int(np.searchsorted(tail[::-1], 0.5, side="right"))
    shift = 0
    if not size // 3 <= c <= 2 * size // 3:
        shift = c - size // 3
    if shift > 0:
        tail = np.concatenate([tail[shift:], np.zeros(shift)])
    elif shift < 0:
        tail = np.concatenate([np.ones(-shift), tail[:shift]])
    new_grid = Grid(grid.origin + shift * grid.dx, grid.dx, size)
    return WaveProfile(new_grid, tail, alpha, n, jump)


def step(profile: WaveProfile) -> WaveProfile:
    """One smoothing-recursion step: square, Gaussian-convolve, recenter."""
    grid = profile.grid
    if profile.jump_x is not None:
        # exact one-step image of a unit step: Phi relative to the jump
        tail = 0.5 * erfc((grid.xs() - profile.jump_x) / math.sqrt(2.0))
        return _recenter(grid, tail, profile.n + 1, profile.alpha_tag, None)
    w = _kernel(grid.dx)
    taps = len(w) // 2
    eps = profile.tail
    integrand = eps * (2.0 - eps)  # = 1 - G^2
    padded = np.concatenate([np.ones(taps), integrand, np.zeros(taps)])
    tail = np.convolve(padded, w, mode="valid")
    if np.any(np.diff(tail) > MONOTONE_TOL):
        raise WaveError("step produced a non-monotone profile")
    tail = np.clip(tail, 0.0, 1.0)
    tail = np.maximum.accumulate(tail[::-1])[::-1]
    return _recenter(grid, tail, profile.n + 1, profile.alpha_tag, None)


def _crossing_tail(xs: np.ndarray, tail: np.ndarray, tail_level: float,
                   leftmost: bool = False) -> float:
    """x where the (nonincreasing) tail crosses tail_level."""
    rev = tail[::-1]
    size = len(tail)
    i = size - int(np.searchsorted(rev, tail_level, side="right"))
    # tail[i-1] > level >= tail[i]
    if i >= size:
        raise WaveError("profile does not straddle the requested level")
    if leftmost or i == 0 or tail[i - 1] == tail[i]:
        return float(xs[i])
    frac = (tail[i - 1] - tail_level) / (tail[i - 1] - tail[i])
    return float(xs[i - 1] + frac * (xs[i] - xs[i - 1]))


def front_position(profile: WaveProfile) -> float:
    """Absolute position of the level-1/2 crossing.

    Piecewise-linear interpolation; exact step data uses the leftmost grid
    point at or above value 1/2.
    """
    return _crossing_tail(profile.xs(), profile.tail, 0.5,
                          leftmost=profile.jump_x is not None)


def front_width(profile: WaveProfile) -> float:
    """x at value 0.9 minus x at value 0.1."""
    xs = profile.xs()
    return (_crossing_tail(xs, profile.tail, 0.1)
            - _crossing_tail(xs, profile.tail, 0.9))


@dataclass
class FrontFit:
    linear_coef: float
    log_coef: float
    const: float
    log_coef_se: float


@dataclass
class FrontTrace:
    alpha: float
    m: np.ndarray        # m[k] = absolute front position after k steps
    widths: np.ndarray
    fitted: Optional[FrontFit] = None

    def speeds(self) -> np.ndarray:
        return np.diff(self.m)


def fit_front_trace(trace: FrontTrace, n_lo: int, n_hi: int) -> FrontFit:
    """Least squares m_n ~ a n + b log n + c over n in [n_lo, n_hi]."""
    ns = np.arange(n_lo, n_hi + 1)
    y = trace.m[n_lo:n_hi + 1]
    X = np.column_stack([ns, np.log(ns), np.ones(len(ns))])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(len(ns) - 3, 1)
    cov = float(resid @ resid) / dof * np.linalg.inv(X.T @ X)
    return FrontFit(float(coef[0]), float(coef[1]), float(coef[2]),
                    math.sqrt(max(cov[1, 1], 0.0)))


def tracking_grid(alpha: float, iterations: int, dx: float = 0.02) -> Grid:
    """Window wide enough for the whole run.

    Tails decaying slower than the critical rate are consumed, not rebuilt:
    the forward span must hold the initial tail out to c(alpha)*N.  At or
    above the critical rate the front grows its own tail and only the
    diffusive range ~4 sqrt(N) ahead matters.
    """
    if alpha < SQRT2LOG2:
        ahead = c_alpha(alpha) * iterations + 4.0 * math.sqrt(iterations) + 2 * KERNEL_CUTOFF
    else:
        ahead = 4.5 * math.sqrt(iterations) + 3 * KERNEL_CUTOFF
    width = max(1.5 * ahead, 80.0)
    size = int(round(width / dx)) + 1
    return Grid(-round(width / (3 * dx)) * dx, dx, size)


def run_front_tracking(alpha: float, iterations: int,
                       grid: Grid | None = None) -> FrontTrace:
    """Iterate the recursion from the alpha initial-data class, tracking the front."""
    if iterations < 10:
        raise WaveError("need at least 10 iterations")
    if grid is None:
        grid = tracking_grid(alpha, iterations)
    profile = init_profile(alpha, grid)
    m = np.empty(iterations + 1)
    widths = np.empty(iterations + 1)
    m[0] = front_position(profile)
    widths[0] = 0.0 if profile.jump_x is not None else front_width(profile)
    for k in range(1, iterations + 1):
        profile = step(profile)
        m[k] = front_position(profile)
        widths[k] = front_width(profile)
    trace = FrontTrace(alpha, m, widths)
    trace.fitted = fit_front_trace(trace, max(iterations // 2, 2), iterations)
    return trace


def c_alpha(alpha: float) -> float:
    """Asymptotic front speed of the alpha initial-data class."""
    if alpha <= 0:
        raise WaveError("alpha must be positive")
    if alpha <= SQRT2LOG2:
        return alpha / 2.0 + math.log(2.0) / alpha
    return SQRT2LOG2


@dataclass
class CrossingReport:
    degenerate: bool
    crossings: list
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def _sign_pattern(p1: WaveProfile, p2: WaveProfile,
                  tol: float = 1e-9) -> tuple[Optional[float], bool, bool]:
    """(crossing x, single_crossing_ok, all_zero) for p2 - p1 on grid overlap."""
    g1, g2 = p1.grid, p2.grid
    if abs(g1.dx - g2.dx) > 1e-15:
        raise WaveError("profiles must share the grid spacing")
    off = (g2.origin - g1.origin) / g1.dx
    k = int(round(off))
    if abs(off - k) > 1e-9:
        raise WaveError("grids are not aligned to a common lattice")
    lo1, hi1 = max(0, k), min(g1.size, g2.size + k)
    if hi1 - lo1 < 2:
        raise WaveError("profiles no longer overlap")
    d = p1.tail[lo1:hi1] - p2.tail[lo1 - k:hi1 - k]  # = values2 - values1
    signs = np.where(np.abs(d) <= tol, 0, np.sign(d))
    nz = signs[signs != 0]
    if len(nz) == 0:
        return None, True, True
    flips = int(np.sum(nz[1:] != nz[:-1]))
    crossing = None
    if flips >= 1:
        pos = np.nonzero(signs != 0)[0]
        for a, b in zip(pos[:-1], pos[1:]):
            if signs[a] != signs[b]:
                crossing = g1.origin + g1.dx * 0.5 * (lo1 + a + lo1 + b)
                break
    return crossing, flips <= 1, False


def crossing_check(p1: WaveProfile, p2: WaveProfile, steps: int) -> CrossingReport:
    """Evolve both profiles, verifying p2 - p1 changes sign at most once.

    The initial difference must itself have at most one sign change; the
    check asserts the property is preserved by every step and records the
    crossing location sequence.
    """
    crossings = []
    violations = []
    x0, ok0, zero0 = _sign_pattern(p1, p2)
    if zero0:
        return CrossingReport(True, [], [])
    if not ok0:
        raise WaveError("initial profiles cross more than once")
    crossings.append(x0)
    for k in range(1, steps + 1):
        p1 = step(p1)
        p2 = step(p2)
        x, ok, _ = _sign_pattern(p1, p2)
        crossings.append(x)
        if not ok:
            violations.append(k)
    return CrossingReport(False, crossings, violations)


def laplace_tail_exponent(profile: WaveProfile, beta: float,
                          tail_lo: float = 1e-4, tail_hi: float = 1e-2) -> float:
    """Small-argument exponent of 1 - (Laplace transform), read off the tail.

    Fits the decay rate of 1 - G^2 ahead of the recentred front and converts
    it to the transform exponent through the e^{beta x} change of scale.
    """
    if beta < 1:
        raise WaveError("beta must be >= 1")
    xs = profile.xs() - front_position(profile)
    one_minus_sq = profile.tail * (2.0 - profile.tail)
    sel = (one_minus_sq >= tail_lo) & (one_minus_sq <= tail_hi) & (xs > 0)
    if sel.sum() < 10:
        raise WaveError("tail window too short for a fit")
    slope = linregress(xs[sel], np.log(one_minus_sq[sel])).slope
    return -slope / (beta * SQRT2LOG2)


def trace_to_csv(trace: FrontTrace, path) -> None:
    """CSV export: n, m_n, front_width."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "m_n", "front_width"])
        for k in range(len(trace.m)):
            w.writerow([k, repr(float(trace.m[k])), repr(float(trace.widths[k]))])
