from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlignite.errors import ConfigurationError, DomainError
from nlignite.reaction import IgnitionNonlinearity, derive_constants, reaction_from_config


def test_vanishes_on_threshold_region(nl):
    u = np.linspace(0.0, nl.rho, 101)
    assert np.all(nl.f(u) == 0.0)
    assert nl.f(np.array(1.0)) == 0.0
    assert nl.f(np.array(nl.rho)) == nl.f_prime(np.array(nl.rho)) == nl.f_second(np.array(nl.rho)) == 0.0


def test_sign_structure(nl):
    inside = np.linspace(nl.rho, 1.0, 1002)[1:-1]
    assert np.all(nl.f(inside) > 0)
    above = np.linspace(1.0, 2.0, 1002)[1:]
    assert np.all(nl.f(above) < 0)
    assert np.all(nl.f_prime(above) < 0)


def test_fprime_at_one_closed_form_and_finite_difference(nl):
    expected = -nl.amplitude * (1 - nl.rho) ** nl.q
    assert nl.fprime_at_1 == pytest.approx(expected, rel=1e-15)
    d = 1e-6
    fd = (nl.f(np.array(1 + d)) - nl.f(np.array(1 - d))) / (2 * d)
    assert fd == pytest.approx(expected, rel=1e-6)


def test_derivatives_match_finite_differences(nl, rng):
    u = rng.uniform(nl.rho + 1e-3, 2.0 - 1e-3, 1000)
    d = 1e-6
    fd1 = (nl.f(u + d) - nl.f(u - d)) / (2 * d)
    fd2 = (nl.f_prime(u + d) - nl.f_prime(u - d)) / (2 * d)
    scale1 = np.maximum(np.abs(nl.f_prime(u)), 1e-3)
    scale2 = np.maximum(np.abs(nl.f_second(u)), 1e-3)
    assert np.max(np.abs(fd1 - nl.f_prime(u)) / scale1) <= 1e-6
    assert np.max(np.abs(fd2 - nl.f_second(u)) / scale2) <= 1e-6


def test_domain_error_outside_zero_two(nl):
    with pytest.raises(DomainError):
        nl.f(np.array([-0.1]))
    with pytest.raises(DomainError):
        nl.f_prime(np.array([2.5]))


@pytest.mark.parametrize("kw", [{"rho": 0.0}, {"rho": 1.0}, {"amplitude": -1.0}, {"q": 2}, {"q": 3.5}])
def test_invalid_parameters(kw):
    with pytest.raises(ConfigurationError):
        IgnitionNonlinearity(**kw)


def test_default_constants(nl, constants):
    # max f' = 0.5 by calibration; f' vanishes at rho + q(1 - rho)/(q + 1) = 0.8125
    assert constants.fprime_max == pytest.approx(0.5, abs=1e-10)
    assert constants.m0 == pytest.approx(0.1875, abs=1e-12)
    assert abs(nl.f_prime(np.array(1 - constants.m0))) <= 1e-12
    # f'' = a q s^{q-2}((q-1)d - (q+1)s) is maximal on [0, 2] at s = (q-1)d/(2(q+1))
    s = 2 * 0.75 / 8
    assert constants.L == pytest.approx(float(nl.f_second(np.array(0.25 + s))), rel=1e-10)
    u = np.linspace(0, 1, 100001)
    assert constants.M == pytest.approx(nl.f(u).max(), rel=1e-8)


def test_calibration_fixed_point(nl):
    again = derive_constants(IgnitionNonlinearity(nl.rho, nl.amplitude, nl.q))
    assert again.fprime_max == pytest.approx(0.5, abs=1e-10)


@given(st.floats(0.01, 5.0))
@settings(max_examples=20, deadline=None)
def test_amplitude_scaling(s):
    base = IgnitionNonlinearity(0.25, 0.1, 3)
    a, b = derive_constants(base), derive_constants(IgnitionNonlinearity(0.25, 0.1 * s, 3))
    assert b.M == pytest.approx(s * a.M, rel=1e-9)
    assert b.L == pytest.approx(s * a.L, rel=1e-9)
    assert b.fprime_max == pytest.approx(s * a.fprime_max, rel=1e-9)
    assert b.m0 == pytest.approx(a.m0, abs=1e-12)


def test_small_amplitude_limit():
    c = derive_constants(IgnitionNonlinearity(0.25, 1e-9, 3))
    assert c.M < 1e-9 and c.L < 1e-8


def test_fprime_max_at_least_one_rejected():
    with pytest.raises(ConfigurationError):
        derive_constants(IgnitionNonlinearity.calibrated(fprime_max=1.2))


def test_sign_on_zero_one_and_one_two(nl):
    u = np.linspace(0, 2, 4001)
    f = nl.f(u)
    assert np.all(f[u <= 1] >= 0) and np.all(f[u >= 1] <= 0)


def test_reaction_from_config():
    assert reaction_from_config(None).fprime_max_exact == pytest.approx(0.5, rel=1e-12)
    assert reaction_from_config({"amplitude": 2.0}).amplitude == 2.0
    assert reaction_from_config({"rho": 0.3, "q": 4, "fprime_max": 0.3}).fprime_max_exact == pytest.approx(0.3)
    with pytest.raises(ConfigurationError):
        reaction_from_config({"amplitude": 1.0, "fprime_max": 0.5})
