"""Branching random walk generation and cascade measure statistics.

A depth-n realization assigns to every node of the binary tree an
independent increment of the model law; the leaf potential X_sigma is the
sum along the root-to-leaf path.  Nodes are addressed heap-style (node j
at depth k has address 2^k + j), and each increment is a pure function of
(stream key, node address), so identical specs reproduce identical trees
and any subtree can be regenerated in isolation.

Leaf potentials are produced either as full per-level arrays (fast path,
used up to MAX_MATERIALIZED_LEVEL) or streamed in fixed-size blocks with a
depth-first stack of ancestor partial sums, which keeps working memory at
O(block + depth) for deep trees.  Both paths emit bit-identical values.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import rng
from .spectral import SpectralModel, phi_tilde, LOG2

LEVEL_CAP = 30
MAX_MATERIALIZED_LEVEL = 24
BLOCK_EXP = 14  # leaves per streamed block
SUM_BLOCK = 1 << 14  # pairwise-summation block for reductions
LSE_THRESHOLD = 600.0  # switch to log-sum-exp above this exponent
MEMORY_BUDGET_BYTES = 6 << 30
DUMP_MAGIC = b"CASC"
DUMP_VERSION = 1


class CascadeError(ValueError):
    pass


class LevelCapError(CascadeError):
    pass


class MemoryBudgetError(CascadeError):
    pass


class OverflowSumError(CascadeError):
    pass


class Tag(enum.Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"
    RAW = "raw"
    UNIFORM_STUB = "uniform-stub"


@dataclass(frozen=True)
class CascadeSpec:
    """Input of one cascade realization: depth, increment law, seed, beta."""

    level_n: int
    model: SpectralModel
    seed: int
    beta: float = 1.0

    def __post_init__(self):
        if not 1 <= self.level_n <= LEVEL_CAP:
            raise LevelCapError(f"level_n must be in [1, {LEVEL_CAP}], got {self.level_n}")
        if not self.beta > 0:
            raise CascadeError("beta must be positive")

    def with_replica_seedstream(self, replica: int) -> int:
        return rng.derive_key(self.seed, rng.PURPOSE_CASCADE, replica)


def _check_memory(level_n: int, arrays: int = 3) -> None:
    need = (1 << level_n) * 8 * arrays
    if need > MEMORY_BUDGET_BYTES:
        raise MemoryBudgetError(
            f"materializing 2^{level_n} leaves needs ~{need >> 20} MiB, "
            f"over the {MEMORY_BUDGET_BYTES >> 20} MiB budget")


@dataclass
class LeafEnsemble:
    """One realization of the depth-n leaf potentials.

    Iteration yields (leaf_index, X_sigma) in depth-first (= left to right)
    order.  `potentials()` materializes the full leaf array; `iter_blocks()`
    streams it in blocks without materializing the tree.
    """

    spec: CascadeSpec
    replica: int = 0
    _key: int = field(init=False, repr=False)

    def __post_init__(self):
        self._key = self.spec.with_replica_seedstream(self.replica)

    @property
    def level_n(self) -> int:
        return self.spec.level_n

    def _level_draws(self, depth: int, first: int, count: int) -> np.ndarray:
        """Increments of the `count` nodes at `depth` starting at node index `first`."""
        m = self.spec.model
        start = (1 << depth) + first
        return rng.normals(self._key, start, count, m.mean, m.std)

    def potentials(self) -> np.ndarray:
        """Full array of the 2^n leaf potentials (fast path)."""
        n = self.level_n
        if n > MAX_MATERIALIZED_LEVEL:
            raise MemoryBudgetError(f"use iter_blocks() for level_n={n}")
        _check_memory(n)
        x = self._level_draws(1, 0, 2)
        for depth in range(2, n + 1):
            x = np.repeat(x, 2)
            x += self._level_draws(depth, 0, 1 << depth)
        return x

    def iter_blocks(self, block_exp: int = BLOCK_EXP) -> Iterator[np.ndarray]:
        """Stream leaf potentials in blocks of 2^block_exp, left to right.

        Ancestors above the block roots are held as a depth-first stack of
        partial sums, recomputed incrementally as the walk advances.
        """
        n = self.level_n
        if n <= block_exp:
            yield self.potentials() if n <= MAX_MATERIALIZED_LEVEL else self._subtree(0, n, 0.0)
            return
        top = n - block_exp
        m = self.spec.model
        path = np.zeros(top + 1)
        for depth in range(1, top + 1):
            addr = 1 << depth  # leftmost node at this depth
            path[depth] = path[depth - 1] + rng.normal_at(self._key, addr, m.mean, m.std)
        nblocks = 1 << top
        for block in range(nblocks):
            yield self._subtree(block, block_exp, path[top])
            nxt = block + 1
            if nxt == nblocks:
                break
            # Depth-first advance: redo the path suffix below the deepest
            # ancestor shared with the next block.
            change = top - (block ^ nxt).bit_length() + 1
            for depth in range(change, top + 1):
                addr = (1 << depth) + (nxt >> (top - depth))
                path[depth] = path[depth - 1] + rng.normal_at(self._key, addr, m.mean, m.std)

    def _subtree(self, root_index: int, depth: int, offset: float) -> np.ndarray:
        """Leaf potentials of the subtree rooted at (level_n - depth, root_index)."""
        n = self.level_n
        x = np.full(1, offset)
        for d in range(1, depth + 1):
            lvl = n - depth + d
            x = np.repeat(x, 2)
            x += self._level_draws(lvl, root_index << d, 1 << d)
        return x

    def __iter__(self) -> Iterator[tuple[int, float]]:
        idx = 0
        for block in self.iter_blocks():
            for v in block:
                yield idx, float(v)
                idx += 1

    def subtree_potentials(self, depth: int, index: int) -> np.ndarray:
        """Leaf potentials below node (depth, index), including ancestor sums.

        Demonstrates per-node keying: the subtree regenerates bit-identically
        without touching the rest of the tree.
        """
        m = self.spec.model
        off = 0.0
        for d in range(1, depth + 1):
            addr = (1 << d) + (index >> (depth - d))
            off += rng.normal_at(self._key, addr, m.mean, m.std)
        return self._subtree(index, self.level_n - depth, off)


def generate_leaves(spec: CascadeSpec, replica: int = 0) -> LeafEnsemble:
    """Realize the leaf-potential stream for `spec` (deterministic in spec)."""
    return LeafEnsemble(spec, replica)


def _blockwise(arr: np.ndarray) -> Iterator[np.ndarray]:
    for i in range(0, len(arr), SUM_BLOCK):
        yield arr[i:i + SUM_BLOCK]


def _exp_sum(ens: LeafEnsemble, beta: float) -> tuple[float, float]:
    """Return (log-scale M, sum of exp(beta*X - M)) over all leaves.

    M = 0 on the plain path; when any exponent exceeds LSE_THRESHOLD the
    whole reduction reruns in log-sum-exp form with M = global max.  Leaf
    values are materialized when memory allows (identical values and
    summation partition either way; streaming only pays off beyond that).
    """
    if ens.level_n <= MAX_MATERIALIZED_LEVEL:
        leaves = ens.potentials()

        def blocks():
            return _blockwise(leaves)
    else:
        def blocks():
            return ens.iter_blocks()

    partials: list[float] = []
    maxexp = -math.inf
    plain = True
    for x in blocks():
        e = beta * x
        bmax = float(e.max())
        maxexp = max(maxexp, bmax)
        if bmax > LSE_THRESHOLD:
            plain = False
        if plain:
            partials.append(float(np.exp(e).sum()))
    if plain:
        return 0.0, math.fsum(partials)
    partials = []
    for x in blocks():
        partials.append(float(np.exp(beta * x - maxexp).sum()))
    return maxexp, math.fsum(partials)


def partition_function(ens: LeafEnsemble, beta: float) -> float:
    """Sum of exp(beta * X_sigma) over the 2^n leaves.

    Blockwise pairwise summation combined with exact compensated addition
    across blocks; switches to a log-sum-exp pass when exponents get large.
    """
    if beta <= 0:
        raise CascadeError("beta must be positive")
    m, s = _exp_sum(ens, beta)
    if m == 0.0:
        return s
    logz = m + math.log(s)
    if logz > 709.0:
        raise OverflowSumError(f"partition function overflows double: log Z = {logz:.1f}")
    return math.exp(logz)


def log_partition_function(ens: LeafEnsemble, beta: float) -> float:
    m, s = _exp_sum(ens, beta)
    return m + math.log(s)


def normalized_statistic(ens: LeafEnsemble, theta: float) -> float:
    """Depth-compensated moment sum: n^{1/2} Z_{1,n} at theta = 1,
    n^{3 theta/2} Z_{theta,n} for theta > 1."""
    if theta < 1:
        raise CascadeError("theta must be >= 1")
    n = ens.level_n
    z = partition_function(ens, theta)
    if theta == 1:
        return math.sqrt(n) * z
    return n ** (1.5 * theta) * z


@dataclass
class DyadicMeasure:
    """Nonnegative mass per depth-n dyadic cell, with CDF and aggregation views."""

    level_n: int
    masses: np.ndarray
    tag: Tag

    def __post_init__(self):
        if len(self.masses) != 1 << self.level_n:
            raise CascadeError("masses length must be 2^level_n")
        if not np.all(np.isfinite(self.masses)) or np.any(self.masses < 0):
            raise CascadeError("masses must be finite and nonnegative")

    @staticmethod
    def uniform(level_n: int) -> "DyadicMeasure":
        return DyadicMeasure(level_n, np.full(1 << level_n, 2.0 ** -level_n), Tag.UNIFORM_STUB)

    def total(self) -> float:
        return math.fsum(float(np.sum(b)) for b in _blockwise(self.masses))

    def cdf(self) -> np.ndarray:
        """F at the right edge of each cell: F[k] = sum of masses[0..k]."""
        return np.cumsum(self.masses)

    def aggregate(self, level: int) -> np.ndarray:
        """Cell masses at a coarser dyadic level (pairwise sums, fixed order)."""
        if not 0 <= level <= self.level_n:
            raise CascadeError("aggregation level out of range")
        out = self.masses
        for _ in range(self.level_n - level):
            out = out.reshape(-1, 2).sum(axis=1)
        return out

    def level_masses(self) -> Iterator[tuple[int, np.ndarray]]:
        """(level, masses) pairs for levels n down to 1."""
        out = self.masses
        yield self.level_n, out
        for level in range(self.level_n - 1, 0, -1):
            out = out.reshape(-1, 2).sum(axis=1)
            yield level, out


def build_measure(ens: LeafEnsemble, beta: float) -> DyadicMeasure:
    """Cascade measure at depth n with the regime-correct normalization.

    beta < 1: masses (E Z)^{-1} e^{beta X} = 2^{-n phi_tilde(beta)} e^{beta X};
    beta = 1: n^{1/2} e^{X}; beta > 1: n^{3 beta/2} e^{beta X}.
    """
    if beta <= 0:
        raise CascadeError("beta must be positive")
    n = ens.level_n
    _check_memory(n)
    x = ens.potentials()
    if beta < 1:
        shift = -n * phi_tilde(ens.spec.model, beta) * LOG2
        masses = np.exp(beta * x + shift)
        tag = Tag.SUBCRITICAL
    elif beta == 1:
        masses = math.sqrt(n) * np.exp(x)
        tag = Tag.CRITICAL
    else:
        masses = n ** (1.5 * beta) * np.exp(beta * x)
        tag = Tag.SUPERCRITICAL
    return DyadicMeasure(n, masses, tag)


def raw_measure(ens: LeafEnsemble, beta: float = 1.0) -> DyadicMeasure:
    """Unnormalized masses e^{beta X}."""
    return DyadicMeasure(ens.level_n, np.exp(beta * ens.potentials()), Tag.RAW)


def max_leaf_mass(measure: DyadicMeasure) -> float:
    if len(measure.masses) == 0:
        raise CascadeError("empty measure")
    return float(measure.masses.max())


def total_mass_normalization(model: SpectralModel, beta: float, n: int) -> float:
    """Multiplier r with r * Z_{beta,n} the convergent total-mass statistic."""
    if beta < 1:
        return 2.0 ** (-n * phi_tilde(model, beta))
    if beta == 1:
        return math.sqrt(n)
    return n ** (1.5 * beta)


def sample_total_mass(spec: CascadeSpec, beta: float, replicas: int,
                      replica_start: int = 0) -> np.ndarray:
    """Independent draws of the normalized total mass at depth level_n.

    Replica r uses the stream keyed by (seed, r); disjoint replica ranges
    may be computed in parallel and concatenated.
    """
    if replicas < 1:
        raise CascadeError("replicas must be >= 1")
    norm = total_mass_normalization(spec.model, beta, spec.level_n)
    out = np.empty(replicas)
    for i in range(replicas):
        ens = LeafEnsemble(spec, replica_start + i)
        out[i] = norm * partition_function(ens, beta)
    return out


def limit_max_leaf_mass(spec: CascadeSpec, total_mass_pool: np.ndarray,
                        replica: int = 0, ref_depth: int = LEVEL_CAP) -> float:
    """Max cell mass of the limit critical measure at depth n, by composition.

    The limit measure assigns cell sigma the mass e^{X_sigma} Y^(sigma) with
    the Y^(sigma) independent copies of the total mass; here they are drawn
    from a precomputed pool of total-mass approximants.  Each cell's draw is
    keyed by its left-edge leaf at `ref_depth`, so coarser and finer
    realizations of the same replica share draws cell-by-cell (common random
    numbers across depths) while cells within one depth stay independent.

    The plain depth-n mass field sqrt(n) e^{X} misses the heavy factors
    entirely: its maximum scales like n^{-1} instead of the n^{-1/2} of the
    limit measure, so max statistics must be read off this composite.
    """
    n = spec.level_n
    if ref_depth < n:
        raise CascadeError("ref_depth must be at least level_n")
    if len(total_mass_pool) < 1000:
        raise CascadeError("total-mass pool too small")
    ens = LeafEnsemble(spec, replica)
    key = rng.derive_key(spec.seed, rng.PURPOSE_COMPOSE, replica)
    pool = np.asarray(total_mass_pool, dtype=float)
    best = -math.inf
    offset = 0
    for x in ens.iter_blocks():
        ctrs = (np.arange(offset, offset + len(x), dtype=np.uint64)
                << np.uint64(ref_depth - n))
        u = rng.keyed_uniform(np.uint64(key), ctrs)
        idx = np.minimum((u * len(pool)).astype(np.int64), len(pool) - 1)
        best = max(best, float(np.max(np.exp(x) * pool[idx])))
        offset += len(x)
    return best


def _interval_weight(level: int, gamma: float) -> float:
    return math.log1p(2.0 ** level) ** gamma


def modulus_statistic(measure: DyadicMeasure, gamma: float) -> float:
    """max over dyadic cells of mu(I) * log(1 + 1/|I|)^gamma, levels 1..n."""
    if gamma <= 0:
        raise CascadeError("gamma must be positive")
    best = 0.0
    for level, masses in measure.level_masses():
        best = max(best, float(masses.max()) * _interval_weight(level, gamma))
    return best


def submodulus_statistic(measure: DyadicMeasure, beta: float, gamma: float,
                         model: SpectralModel | None = None) -> float:
    """max over dyadic cells of mu(I) |I|^{-phi_tilde(beta)} log(1+1/|I|)^{gamma beta}."""
    if not 0 < beta < 1:
        raise CascadeError("beta must lie in (0, 1)")
    if not 0 < gamma < 0.5:
        raise CascadeError("gamma must lie in (0, 1/2)")
    if model is None:
        model = SpectralModel.gaussian_critical()
    holder = phi_tilde(model, beta)
    best = 0.0
    for level, masses in measure.level_masses():
        w = 2.0 ** (level * holder) * _interval_weight(level, gamma * beta)
        best = max(best, float(masses.max()) * w)
    return best


def write_masses(path, measure: DyadicMeasure) -> None:
    """Binary dump: 16-byte header (magic, version, level, count) + f64 LE."""
    header = struct.pack("<4sIII", DUMP_MAGIC, DUMP_VERSION, measure.level_n,
                         len(measure.masses))
    with open(path, "wb") as fh:
        fh.write(header)
        measure.masses.astype("<f8").tofile(fh)


def read_masses(path) -> DyadicMeasure:
    with open(path, "rb") as fh:
        magic, version, level, count = struct.unpack("<4sIII", fh.read(16))
        if magic != DUMP_MAGIC:
            raise CascadeError(f"bad magic {magic!r}")
        if version != DUMP_VERSION:
            raise CascadeError(f"unsupported dump version {version}")
        data = np.fromfile(fh, dtype="<f8", count=count)
    if len(data) != count or count != 1 << level:
        raise CascadeError("truncated or inconsistent dump")
    return DyadicMeasure(level, data.astype(np.float64), Tag.RAW)
