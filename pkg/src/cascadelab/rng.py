"""Splittable counter-based random number generation.

Every variate in the laboratory is a pure function of a 64-bit stream key
and a 64-bit counter.  Streams are derived from (seed, purpose, index)
triples, and counters are node addresses inside a binary tree (or cell
indices, or plain draw positions).  This makes any subtree, any replica,
and any cell reproducible in isolation, independent of evaluation order,
thread count, or block size.

The core primitive is a two-round splitmix64-style mixer.  The key enters
both as a multiplicative stream constant and as an additive stir between
the two finalizer rounds, so streams with different keys are not
translates of one another.  Normal variates are produced by inverting the
standard normal CDF (Wichura's AS241 double-precision rational
approximation, |error| < 1e-15) on the 53-bit uniform carried by the high
bits of the mixed counter.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, uint64, float64, vectorize

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MIX3 = 0xD6E8FEB86659FD93

# Purpose tags keep the cascade field, subordinator, composition and
# scratch draws on provably disjoint streams.
PURPOSE_CASCADE = 0x01
PURPOSE_SUBORDINATOR = 0x02
PURPOSE_SCRATCH = 0x03
PURPOSE_COMPOSE = 0x04


@njit(uint64(uint64, uint64), inline="always", cache=True)
def _mix(key, ctr):
    z = ctr + uint64(_GOLDEN) * (key | uint64(1))
    z = (z ^ (z >> uint64(30))) * uint64(_MIX1)
    z = (z ^ (z >> uint64(27))) * uint64(_MIX2)
    z = z ^ (z >> uint64(31))
    z = (z + key) * uint64(_MIX3)
    z = (z ^ (z >> uint64(32))) * uint64(_MIX3)
    return z ^ (z >> uint64(32))


@njit(float64(float64), inline="always", cache=True)
def _inv_norm_cdf(p):
    # Wichura AS241 (PPND16).
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r
                    + 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r
                  + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r
                + 1.3314166789178437745e+2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r
                    + 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r
                  + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r
                + 4.2313330701600911252e+1) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    return -val if q < 0.0 else val


@vectorize(["float64(uint64, uint64)"], target="cpu", cache=True)
def keyed_uniform(key, ctr):
    """Uniform on (0, 1), strictly, one value per (key, counter)."""
    return ((_mix(key, ctr) >> uint64(11)) + 0.5) * (2.0 ** -53)


@vectorize(["float64(uint64, uint64, float64, float64)"], target="cpu", cache=True)
def keyed_normal(key, ctr, mean, std):
    """Normal(mean, std^2) variate addressed by (key, counter)."""
    u = ((_mix(key, ctr) >> uint64(11)) + 0.5) * (2.0 ** -53)
    return mean + std * _inv_norm_cdf(u)


def derive_key(seed: int, purpose: int, index: int = 0) -> int:
    """Derive a 64-bit stream key from (seed, purpose, index).

    Chained through the mixer so that related (seed, index) pairs land on
    unrelated keys.
    """
    k = _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(purpose))
    return int(_mix(k, np.uint64(index & 0xFFFFFFFFFFFFFFFF)))


def uniforms(key: int, start: int, count: int) -> np.ndarray:
    """Uniform(0,1) draws at counters [start, start + count)."""
    ctrs = np.arange(start, start + count, dtype=np.uint64)
    return keyed_uniform(np.uint64(key), ctrs)


def normals(key: int, start: int, count: int,
            mean: float = 0.0, std: float = 1.0) -> np.ndarray:
    """Normal draws at counters [start, start + count)."""
    ctrs = np.arange(start, start + count, dtype=np.uint64)
    return keyed_normal(np.uint64(key), ctrs, mean, std)


def normal_at(key: int, ctr: int, mean: float = 0.0, std: float = 1.0) -> float:
    return float(keyed_normal(np.uint64(key), np.uint64(ctr), mean, std))
