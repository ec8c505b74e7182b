"""One-sided stable subordinators and their composition with cascade measures.

The sampler produces the totally skewed positive alpha-stable law pinned to
Laplace transform E exp(-u L) = exp(-u^alpha) (no free scale), via Kanter's
representation

    L = (A(pi U) / E)^{(1-alpha)/alpha},
    A(x) = sin(alpha x)^{alpha/(1-alpha)} sin((1-alpha) x) / sin(x)^{1/(1-alpha)},

with U uniform on (0,1) and E standard exponential.  An increment over a
time gap s is s^{1/alpha} L by the scaling property.  Composing the
increments with a cascade CDF realizes the frozen-phase measures: each
dyadic cell receives an independent increment with gap equal to its
cascade mass, and the resulting cell masses are treated as atoms at dyadic
resolution.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .cascade import DyadicMeasure, Tag, _blockwise


class LevyError(ValueError):
    pass


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise LevyError(f"stability index must lie in (0, 1), got {alpha}")


def stable_draws(alpha: float, count: int, key: int, start: int = 0) -> np.ndarray:
    """`count` unit-scale positive stable draws at counters [start, start+count).

    Each draw consumes the uniform pair at counters (2i, 2i+1).
    """
    _check_alpha(alpha)
    u = rng.uniforms(key, 2 * start, 2 * count)
    phi = math.pi * u[0::2]
    expo = -np.log(u[1::2])
    a = alpha / (1.0 - alpha)
    log_a = (a * np.log(np.sin(alpha * phi))
             + np.log(np.sin((1.0 - alpha) * phi))
             - (1.0 + a) * np.log(np.sin(phi)))
    return np.exp((log_a - np.log(expo)) / a)


def sample_stable_increment(alpha: float, gap: float, key: int, ctr: int = 0) -> float:
    """One increment of the subordinator over a time gap >= 0."""
    _check_alpha(alpha)
    if gap < 0:
        raise LevyError("gap must be nonnegative")
    if gap == 0.0:
        return 0.0
    s = stable_draws(alpha, 1, key, ctr)[0]
    return gap ** (1.0 / alpha) * float(s)


@dataclass
class SubordinatorPath:
    """Subordinator increments over the gaps of a nondecreasing time array."""

    alpha: float
    times: np.ndarray
    increments: np.ndarray

    def values(self) -> np.ndarray:
        """L evaluated at the times (cumulative increments, L(0)=0 implied)."""
        return np.cumsum(self.increments)


def evaluate_along(alpha: float, times: np.ndarray, key: int) -> SubordinatorPath:
    """Sample the subordinator along `times` (nondecreasing, >= 0)."""
    _check_alpha(alpha)
    t = np.asarray(times, dtype=float)
    if np.any(np.diff(t) < 0) or (len(t) and t[0] < 0):
        raise LevyError("times must be nondecreasing and nonnegative")
    gaps = np.diff(t, prepend=0.0)
    draws = stable_draws(alpha, len(t), key)
    inc = np.where(gaps > 0, gaps ** (1.0 / alpha) * draws, 0.0)
    return SubordinatorPath(alpha, t, inc)


@dataclass
class AtomicMeasure:
    """Per-cell subordinator increments of a base measure, read as atoms.

    Atoms are resolved at the base dyadic level; finer jump structure
    inside a cell is not represented.
    """

    alpha: float
    level_n: int
    atom_masses: np.ndarray
    base_tag: Tag

    def total(self) -> float:
        return math.fsum(float(np.sum(b)) for b in _blockwise(self.atom_masses))

    def as_measure(self) -> DyadicMeasure:
        return DyadicMeasure(self.level_n, self.atom_masses, Tag.SUPERCRITICAL)


def subordinate(measure: DyadicMeasure, alpha: float, seed: int,
                replica: int = 0) -> AtomicMeasure:
    """Independent stable increment per dyadic cell, gap = cell mass.

    The subordinator stream is keyed separately from the cascade stream, so
    the two stay independent; cell i consumes the uniform pair at counters
    (2i, 2i+1) and may be drawn in isolation.
    """
    _check_alpha(alpha)
    key = rng.derive_key(seed, rng.PURPOSE_SUBORDINATOR, replica)
    masses = measure.masses
    if len(masses) and float(masses.max()) == 0.0:
        return AtomicMeasure(alpha, measure.level_n, np.zeros_like(masses), measure.tag)
    draws = stable_draws(alpha, len(masses), key)
    atoms = np.where(masses > 0, masses ** (1.0 / alpha) * draws, 0.0)
    return AtomicMeasure(alpha, measure.level_n, atoms, measure.tag)


def largest_atoms(am: AtomicMeasure, k: int) -> list[tuple[float, float]]:
    """Top-k cells by mass as (dyadic midpoint, mass); ties go leftmost."""
    if k < 1:
        raise LevyError("k must be >= 1")
    masses = am.atom_masses
    k = min(k, len(masses))
    # stable sort on (-mass, index) gives mass-descending, leftmost-first ties
    order = np.lexsort((np.arange(len(masses)), -masses))[:k]
    width = 2.0 ** -am.level_n
    return [((int(i) + 0.5) * width, float(masses[i])) for i in order]


def atom_report(am: AtomicMeasure, beta: float | None, k: int = 32) -> str:
    """JSON report {alpha, beta, n, atoms: [{loc, mass}], total}."""
    atoms = [{"loc": loc, "mass": mass} for loc, mass in largest_atoms(am, k)]
    payload = {
        "alpha": am.alpha,
        "beta": beta,
        "n": am.level_n,
        "atoms": atoms,
        "total": am.total(),
    }
    return json.dumps(payload, indent=2)


def null_set_pushforward_check(alpha: float, measure: DyadicMeasure,
                               cover: list[tuple[int, int]], replicas: int,
                               seed: int) -> float:
    """Mean over replicas of the subordinated mass of a dyadic cover.

    `cover` lists (level, index) cells, disjoint, each no finer than the
    base measure.  Small covers of thin sets should carry vanishing mass.
    """
    _check_alpha(alpha)
    if replicas < 1:
        raise LevyError("replicas must be >= 1")
    if not cover:
        return 0.0
    aggregates = {}
    gaps = np.empty(len(cover))
    for j, (level, index) in enumerate(cover):
        if not 0 <= level <= measure.level_n:
            raise LevyError("cover level out of range")
        if level not in aggregates:
            aggregates[level] = measure.aggregate(level)
        gaps[j] = aggregates[level][index]
    totals = np.empty(replicas)
    for r in range(replicas):
        key = rng.derive_key(seed, rng.PURPOSE_SUBORDINATOR, r)
        draws = stable_draws(alpha, len(gaps), key)
        totals[r] = float(np.sum(np.where(gaps > 0, gaps ** (1.0 / alpha) * draws, 0.0)))
    return float(totals.mean())
