"""Statistical estimators: heavy tails, multifractal spectra, dimensions.

These confront simulation output with the limit theory: a Hill-type tail
index with an x*P(X>x) plateau readout, partition-sum structure exponents
with a discrete Legendre transform, Euclidean box-counting dimension, and
the dimension of a set measured through a cascade measure (mass of covering
cells replacing interval length), estimated by locating the moment order
whose cover sums neither grow nor decay across depths.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from scipy.stats import ks_2samp, linregress

from .cascade import DyadicMeasure, Tag

LOG2 = math.log(2.0)
MIN_CELL_MASS = 1e-300
KS_COEFF_1PCT = 1.62762  # Kolmogorov distribution 99% point


class EstimatorError(ValueError):
    pass


class InsufficientSamplesError(EstimatorError):
    pass


class DegenerateSamplesError(EstimatorError):
    pass


class AtomicMeasureError(EstimatorError):
    pass


# ---------------------------------------------------------------------------
# dyadic set predicates

class DyadicSet:
    """Membership predicate on closed dyadic cells [j/2^k, (j+1)/2^k]."""

    def intersects(self, level: int, index: int) -> bool:
        raise NotImplementedError

    def cover(self, level: int) -> np.ndarray:
        """Indices of all intersecting cells at `level`, by recursive descent."""
        idx = [0] if self.intersects(0, 0) else []
        for lev in range(1, level + 1):
            nxt = []
            for j in idx:
                if self.intersects(lev, 2 * j):
                    nxt.append(2 * j)
                if self.intersects(lev, 2 * j + 1):
                    nxt.append(2 * j + 1)
            idx = nxt
        return np.array(idx, dtype=np.int64)


class FullInterval(DyadicSet):
    def intersects(self, level: int, index: int) -> bool:
        return 0 <= index < (1 << level)


class SinglePoint(DyadicSet):
    def __init__(self, x: float):
        if not 0.0 <= x <= 1.0:
            raise EstimatorError("point must lie in [0, 1]")
        self.x = x

    def intersects(self, level: int, index: int) -> bool:
        lo = index / (1 << level)
        hi = (index + 1) / (1 << level)
        return lo <= self.x <= hi


class CantorSet(DyadicSet):
    """Middle-third Cantor set, exact integer-arithmetic intersection tests."""

    def intersects(self, level: int, index: int) -> bool:
        return self._hits(index, index + 1, 1 << level)

    @staticmethod
    def _hits(lo: int, hi: int, den: int) -> bool:
        # closed interval [lo/den, hi/den] against C in [0, 1], exact integers
        if hi < 0 or lo > den:
            return False
        if lo <= 0 or hi >= den:
            return True  # touches 0 or 1, both in C
        if 3 * (hi - lo) >= den:
            return True  # longer than the longest (open) gap
        # C is the scaled copies of itself in the outer thirds
        return (CantorSet._hits(3 * lo, 3 * hi, den)
                or CantorSet._hits(3 * lo - 2 * den, 3 * hi - 2 * den, den))


# ---------------------------------------------------------------------------
# tail estimation

@dataclass
class TailEstimate:
    index_hat: float
    plateau_hat: float
    x_range: tuple[float, float]
    n_samples: int
    sensitivity: dict[float, float] = field(default_factory=dict)


def hill_index(samples_desc: np.ndarray, frac: float) -> float:
    """Hill estimator on the top `frac` order statistics (samples sorted desc)."""
    k = max(10, int(len(samples_desc) * frac))
    if k >= len(samples_desc):
        raise InsufficientSamplesError("not enough samples for the tail fraction")
    return 1.0 / float(np.mean(np.log(samples_desc[:k] / samples_desc[k])))


def tail_estimate(samples: np.ndarray, frac: float = 0.05) -> TailEstimate:
    """Tail index via Hill on the top 5%, plateau of x*P(X>x) on the flattest decade.

    The plateau window slides over log-spaced candidates in the upper range
    of the sample; flatness is the absolute regression slope of
    log(x * survival) against log(x).
    """
    x = np.asarray(samples, dtype=float)
    x = x[x > 0]
    if len(x) < 1000:
        raise InsufficientSamplesError(f"need >= 1000 positive samples, got {len(x)}")
    xs = np.sort(x)[::-1]
    if xs[0] == xs[-1]:
        raise DegenerateSamplesError("all samples equal")
    idx = hill_index(xs, frac)
    sens = {f: hill_index(xs, f) for f in (0.02, 0.05, 0.10)}

    # x * survival on the upper two decades, candidate one-decade windows
    n = len(xs)
    ranks = np.arange(1, n + 1)
    surv = ranks / n
    asc = xs[::-1]
    xh = asc * surv[::-1]
    lo_q, hi_q = np.quantile(asc, 0.5), asc[-2]
    grid = np.geomspace(lo_q, hi_q / 10 if hi_q / 10 > lo_q else lo_q * 1.001, 24)
    best = (math.inf, (lo_q, lo_q * 10))
    for g in grid:
        sel = (asc >= g) & (asc <= g * 10)
        if sel.sum() < 50:
            continue
        sl = linregress(np.log(asc[sel]), np.log(xh[sel])).slope
        if abs(sl) < best[0]:
            best = (abs(sl), (float(g), float(g * 10)))
    win = best[1]
    sel = (asc >= win[0]) & (asc <= win[1])
    plateau = float(np.median(xh[sel])) if sel.any() else float("nan")
    return TailEstimate(idx, plateau, win, n, sens)


# ---------------------------------------------------------------------------
# multifractal spectrum

@dataclass
class SpectrumEstimate:
    q_grid: np.ndarray
    tau_hat: np.ndarray
    level_n: int
    excluded_cells: int = 0
    legendre: list[tuple[float, float]] = field(default_factory=list)
    concavity_fixed: bool = False


def structure_function(measure: DyadicMeasure, q_grid: np.ndarray) -> SpectrumEstimate:
    """Partition-sum exponents tau_hat(q) = -(1/n) log2 sum_cells mass^q.

    Computed in log space; cells below MIN_CELL_MASS are excluded (counted),
    protecting negative q from denormal blowups.
    """
    q_grid = np.asarray(q_grid, dtype=float)
    if np.any(q_grid < -2.0) or np.any(q_grid > 4.0):
        raise EstimatorError("q_grid must lie within [-2, 4]")
    masses = measure.masses
    keep = masses > MIN_CELL_MASS
    excluded = int(len(masses) - keep.sum())
    if not keep.any():
        raise EstimatorError("measure has no cells above the mass floor")
    logm = np.log(masses[keep])
    n = measure.level_n
    tau = np.array([-logsumexp(q * logm) / (n * LOG2) for q in q_grid])
    return SpectrumEstimate(q_grid, tau, n, excluded)


def mean_structure_function(measures: list[DyadicMeasure],
                            q_grid: np.ndarray) -> SpectrumEstimate:
    """Replica-mean of the per-replica structure exponents."""
    if not measures:
        raise EstimatorError("no measures given")
    ests = [structure_function(m, q_grid) for m in measures]
    tau = np.mean([e.tau_hat for e in ests], axis=0)
    return SpectrumEstimate(np.asarray(q_grid, dtype=float), tau,
                            measures[0].level_n,
                            sum(e.excluded_cells for e in ests))


def _concave_majorant(q: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Least concave majorant of the points (q, t) (upper convex hull)."""
    pts = list(zip(q, t))
    hull: list[tuple[float, float]] = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (y2 - y1) * (p[0] - x2) <= (p[1] - y2) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(p)
    hx = np.array([h[0] for h in hull])
    hy = np.array([h[1] for h in hull])
    return np.interp(q, hx, hy)


def legendre_spectrum(est: SpectrumEstimate, concavity_tol: float = 1e-9) -> SpectrumEstimate:
    """Discrete Legendre transform: f(gamma) = min_q (q gamma - tau(q)).

    gamma values come from finite-difference slopes of tau_hat, so the
    (gamma, f) points trace the spectrum parametrically in q.  If tau_hat
    is not concave within tolerance it is replaced by its least concave
    majorant and the estimate is flagged.
    """
    q = est.q_grid
    t = est.tau_hat
    if len(q) < 3:
        raise EstimatorError("need at least 3 grid points")
    d2 = np.diff(t, 2)
    fixed = False
    if np.any(d2 > concavity_tol):
        t = _concave_majorant(q, t)
        fixed = True
    gammas = np.gradient(t, q)
    pts = []
    for g in gammas:
        f = float(np.min(q * g - t))
        pts.append((float(g), f))
    out = SpectrumEstimate(q, est.tau_hat, est.level_n, est.excluded_cells,
                           legendre=pts, concavity_fixed=fixed)
    return out


def spectrum_apex(est: SpectrumEstimate) -> float:
    """Largest spectrum value over the Legendre points."""
    if not est.legendre:
        raise EstimatorError("run legendre_spectrum first")
    return max(f for _, f in est.legendre)


def spectrum_slope(est: SpectrumEstimate, gamma_lo: float, gamma_hi: float) -> float:
    """OLS slope of f(gamma) over Legendre points with gamma in [lo, hi]."""
    pts = [(g, f) for g, f in est.legendre if gamma_lo <= g <= gamma_hi]
    if len(pts) < 2:
        raise EstimatorError("fewer than 2 Legendre points in the gamma window")
    g = np.array([p[0] for p in pts])
    f = np.array([p[1] for p in pts])
    return float(linregress(g, f).slope)


# ---------------------------------------------------------------------------
# dimensions

class DimensionMethod(enum.Enum):
    EUCLIDEAN_BOX = "euclidean-box"
    MEASURE_BOX = "measure-box"


@dataclass
class DimensionEstimate:
    zeta_hat: float
    stderr: float
    depth_range: tuple[int, int]
    method: DimensionMethod


def box_dimension(K: DyadicSet, depth_range: tuple[int, int]) -> DimensionEstimate:
    """Regression of log2 (covering cell count) on depth."""
    d0, d1 = depth_range
    if not 0 <= d0 < d1:
        raise EstimatorError("bad depth range")
    depths = np.arange(d0, d1 + 1)
    counts = []
    cover = K.cover(d0)
    counts.append(len(cover))
    idx = cover
    for lev in range(d0 + 1, d1 + 1):
        nxt = []
        for j in idx:
            if K.intersects(lev, 2 * j):
                nxt.append(2 * j)
            if K.intersects(lev, 2 * j + 1):
                nxt.append(2 * j + 1)
        idx = np.array(nxt, dtype=np.int64)
        counts.append(len(idx))
    if min(counts) == 0:
        raise EstimatorError("empty cover; set does not meet [0,1]")
    res = linregress(depths, np.log2(np.array(counts, dtype=float)))
    return DimensionEstimate(float(res.slope), float(res.stderr),
                             depth_range, DimensionMethod.EUCLIDEAN_BOX)


def _cover_log2_sums(K: DyadicSet, measure: DyadicMeasure,
                     depths: np.ndarray, s: float,
                     covers: dict[int, np.ndarray],
                     aggregates: dict[int, np.ndarray]) -> np.ndarray:
    out = np.empty(len(depths))
    for i, d in enumerate(depths):
        nu = aggregates[d][covers[d]]
        nu = nu[nu > MIN_CELL_MASS]
        if len(nu) == 0:
            raise EstimatorError(f"cover at depth {d} carries no mass")
        out[i] = logsumexp(s * np.log(nu)) / LOG2
    return out


def measure_dimension(K: DyadicSet, measure: DyadicMeasure,
                      depth_range: tuple[int, int],
                      bisection_steps: int = 20) -> DimensionEstimate:
    """Dimension of K with cell masses of `measure` in place of cell widths.

    For each moment order s the cover sums sum_I nu(I)^s are regressed on
    depth; the estimate is the s at which the slope crosses zero, found by
    bisection on [0, 1].  Ill-posed for strongly atomic measures: refused
    when a single covering cell holds most of the covered mass.
    """
    d0, d1 = depth_range
    if not 0 <= d0 < d1 <= measure.level_n:
        raise EstimatorError("depth range must fit inside the measure resolution")
    depths = np.arange(d0, d1 + 1)
    covers = {int(d): K.cover(int(d)) for d in depths}
    aggregates = {int(d): measure.aggregate(int(d)) for d in depths}
    for d in depths:
        if len(covers[int(d)]) == 0:
            raise EstimatorError("empty cover")
    if measure.tag == Tag.SUPERCRITICAL:
        # Atomic case is well posed only when K itself carries no atoms.
        # Finite-resolution surrogate: the refined cover must not hold a
        # macroscopic share of the total mass (a dominant atom inside K
        # would pin it there at every depth).
        deep = float(aggregates[d1][covers[d1]].sum())
        total = measure.total()
        if total > 0 and deep / total > 0.5:
            raise AtomicMeasureError(
                "the refined cover holds most of the measure; the set "
                "appears to carry a dominant atom and the dimension is ill-posed")

    def slope(s: float) -> tuple[float, float]:
        ys = _cover_log2_sums(K, measure, depths, s, covers, aggregates)
        res = linregress(depths, ys)
        return float(res.slope), float(res.stderr)

    lo, hi = 0.0, 1.0
    slo, _ = slope(lo)
    shi, _ = slope(hi)
    if slo <= 0:
        zeta = 0.0
    elif shi >= 0:
        zeta = 1.0
    else:
        for _ in range(bisection_steps):
            mid = 0.5 * (lo + hi)
            smid, _ = slope(mid)
            if smid > 0:
                lo = mid
            else:
                hi = mid
        zeta = 0.5 * (lo + hi)
    # error propagation: stderr of the regression slope over the local
    # sensitivity d slope / d s
    eps = 0.02
    s_lo = max(zeta - eps, 0.0)
    s_hi = min(zeta + eps, 1.0)
    g_lo, _ = slope(s_lo)
    g_hi, se = slope(s_hi)
    deriv = (g_hi - g_lo) / (s_hi - s_lo) if s_hi > s_lo else -1.0
    stderr = abs(se / deriv) if deriv != 0 else float("nan")
    return DimensionEstimate(zeta, stderr, depth_range, DimensionMethod.MEASURE_BOX)


# ---------------------------------------------------------------------------
# distribution distance

def ks_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise EstimatorError("both samples must be nonempty")
    return float(ks_2samp(a, b).statistic)


def ks_critical(n: int, m: int, coeff: float = KS_COEFF_1PCT) -> float:
    """Two-sample KS rejection threshold at the coefficient's level."""
    return coeff * math.sqrt((n + m) / (n * m))
