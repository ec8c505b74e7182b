import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from cascadelab.spectral import (SpectralModel, SpectralError, phi, phi_tilde, tau,
                                 tau_star, tau_alpha, tau_alpha_star, kpz_solve,
                                 kpz_dual, q_beta)


def phi_by_quadrature(model, s):
    # independent route: numerically integrate the moment generating function
    m, v = model.mean, model.variance
    sd = math.sqrt(v)
    f = lambda x: math.exp(s * x) * math.exp(-(x - m) ** 2 / (2 * v)) / (sd * math.sqrt(2 * math.pi))
    val, _ = quad(f, m - 12 * sd, m + 12 * sd, limit=200)
    return -math.log2(val)


@pytest.mark.parametrize("s,expected", [(1.0, 1.0), (0.0, 0.0), (0.5, 0.75), (2.0, 0.0)])
def test_phi_values(gaussian, s, expected):
    assert phi(gaussian, s) == pytest.approx(expected, abs=1e-12)
    assert phi_by_quadrature(gaussian, s) == pytest.approx(expected, abs=1e-9)


def test_criticality_conditions(gaussian):
    # E e^xi = 1/2 and E xi e^xi = 0: phi(1) = 1 and phi'(1) = 0
    assert phi(gaussian, 1.0) == pytest.approx(1.0, abs=1e-12)
    h = 1e-6
    deriv = (phi(gaussian, 1 + h) - phi(gaussian, 1 - h)) / (2 * h)
    assert deriv == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("s,expected", [(1.0, 0.0), (0.5, 0.25), (0.0, 1.0)])
def test_phi_tilde_values(gaussian, s, expected):
    assert phi_tilde(gaussian, s) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("s,expected", [(1.0, 0.0), (0.0, -1.0), (3.0, -4.0)])
def test_tau_values(gaussian, s, expected):
    assert tau(gaussian, s) == pytest.approx(expected, abs=1e-12)


def test_phi_zero_for_every_kind():
    for model in (SpectralModel.gaussian_critical(),
                  SpectralModel.gaussian(-1.0, 0.3),
                  SpectralModel.degenerate(-0.7)):
        assert phi(model, 0.0) == 0.0


@pytest.mark.parametrize("g,value,argmin", [(2.0, 1.0, 0.0), (0.0, 0.0, 1.0), (4.0, 0.0, -1.0)])
def test_tau_star_values(gaussian, g, value, argmin):
    pt = tau_star(gaussian, g)
    assert pt.value == pytest.approx(value, abs=1e-10)
    assert pt.argmin_t == pytest.approx(argmin, abs=1e-8)
    # brute-force grid oracle
    ts = np.linspace(-40, 40, 800001)
    brute = float((ts * g - (2 * ts - ts * ts - 1)).min())
    assert pt.value == pytest.approx(brute, abs=1e-8)


def test_tau_star_nonnegative_inside_support(gaussian):
    gs = np.linspace(0.0, 4.0, 101)
    vals = [tau_star(gaussian, g).value for g in gs]
    assert min(vals) >= -1e-12
    assert vals[0] == pytest.approx(0.0, abs=1e-12)
    assert vals[-1] == pytest.approx(0.0, abs=1e-10)
    assert max(vals) <= 1.0 + 1e-12


def test_tau_star_degenerate_unbounded():
    stub = SpectralModel.degenerate(-0.7)
    with pytest.raises(SpectralError):
        tau_star(stub, 2.0)


@pytest.mark.parametrize("s,expected", [(0.5, 0.0), (0.0, -1.0), (0.25, -0.25)])
def test_tau_alpha_values(gaussian, s, expected):
    assert tau_alpha(gaussian, 0.5, s) == pytest.approx(expected, abs=1e-12)


def test_tau_alpha_star_linear_segment():
    # Composition over a high-temperature base: tau stays nonnegative on an
    # interval, so the transform is exactly linear with slope alpha near 0.
    # The normalized weight law for beta = 1/2 is N(-1.25 log2, 0.5 log2).
    sub = SpectralModel.gaussian(-1.25 * math.log(2), 0.5 * math.log(2))
    alpha = 0.5
    for g in (0.05, 0.15, 0.30, 1.0):
        v = tau_alpha_star(sub, alpha, g)
        assert v == pytest.approx(alpha * g, abs=2e-3)
    # over the critical base the linear part degenerates: strictly below the line
    crit = SpectralModel.gaussian_critical()
    assert tau_alpha_star(crit, alpha, 0.3) < alpha * 0.3 - 2e-3


@pytest.mark.parametrize("z,expected", [(1.0, 1.0), (0.0, 0.0),
                                        (math.log(2) / math.log(3), 0.392488480414945)])
def test_kpz_values(gaussian, z, expected):
    assert kpz_solve(gaussian, z) == pytest.approx(expected, abs=1e-10)


def test_kpz_dual_values(gaussian):
    assert kpz_dual(gaussian, 1.0, 0.5) == pytest.approx(0.5, abs=1e-12)
    assert kpz_dual(gaussian, 0.0, 0.9) == 0.0
    z = math.log(2) / math.log(3)
    assert kpz_dual(gaussian, z, 0.5) == pytest.approx(0.1962442402074725, abs=1e-10)


def test_kpz_domain_errors(gaussian):
    with pytest.raises(SpectralError):
        kpz_solve(gaussian, 1.2)
    with pytest.raises(SpectralError):
        kpz_solve(gaussian, -0.1)


@pytest.mark.parametrize("b,expected", [(0.5, 4.0), (0.25, 16.0)])
def test_q_beta_gaussian_closed_form(gaussian, b, expected):
    assert q_beta(gaussian, b) == pytest.approx(expected, abs=1e-10)


def test_q_beta_residual_and_limit(gaussian):
    for b in (0.1, 0.3, 0.6, 0.9, 0.99):
        q = q_beta(gaussian, b)
        assert q > 1.0
        resid = phi_tilde(gaussian, b * q) - q * phi_tilde(gaussian, b)
        assert abs(resid) < 1e-10
    # the two roots merge at criticality
    assert q_beta(gaussian, 0.999) == pytest.approx(1.0, abs=5e-3)


def test_q_beta_rejects_outside_range(gaussian):
    with pytest.raises(SpectralError):
        q_beta(gaussian, 1.5)


# --- invariants -------------------------------------------------------------

@given(st.floats(-2.0, 3.0), st.floats(-2.0, 3.0))
@settings(max_examples=60, deadline=None)
def test_phi_concavity(s1, s2):
    model = SpectralModel.gaussian_critical()
    mid = 0.5 * (s1 + s2)
    assert phi(model, mid) >= 0.5 * (phi(model, s1) + phi(model, s2)) - 1e-8


@given(st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_kpz_inverts_phi(z):
    model = SpectralModel.gaussian_critical()
    zeta = kpz_solve(model, z)
    assert phi(model, zeta) == pytest.approx(z, abs=1e-10)


def test_legendre_consistency(gaussian):
    # tau*(tau'(s)) = s tau'(s) - tau(s), slopes by central differences;
    # s below 1 keeps the slope nonnegative, inside tau_star's domain
    h = 1e-6
    for s in np.linspace(-0.95, 0.95, 39):
        slope = (tau(gaussian, s + h) - tau(gaussian, s - h)) / (2 * h)
        pt = tau_star(gaussian, slope)
        assert pt.value == pytest.approx(s * slope - tau(gaussian, s), abs=1e-8)


def test_second_difference_concavity_grid(gaussian):
    s = np.linspace(-1.0, 3.0, 201)
    vals = np.array([phi(gaussian, x) for x in s])
    d2 = np.diff(vals, 2)
    assert np.all(d2 <= 1e-8)
