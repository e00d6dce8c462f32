from __future__ import annotations

import numpy as np
import pytest

from nlignite.errors import DivergenceError, InsufficientDataError, RootNotFoundError, ValidationError
from nlignite.field import GridFunction
from nlignite.kernel import gaussian, kernel_moment, sample_kernel, top_hat
from nlignite.spectral import (RatioBranch, Which, ZeroBranchWarning, characteristic_derivative,
                               characteristic_eval, find_roots, ratio_diagnostic, sign_pattern,
                               tail_rate_fit)
from nlignite.waves import Orientation, WaveSolution

# frozen roots for the default configuration
ROOTS_REF = {"mu1": 0.421590, "mu21": -0.705175, "mu22": 1.280539,
             "mu1_hat": 0.273502, "mu21_hat": -1.085701, "mu22_hat": 0.755108}


def test_characteristic_values_at_zero(spec, nl):
    for c in (-0.7, 0.0, 0.45):
        assert characteristic_eval("F1", 0.0, spec, c) == pytest.approx(0.0, abs=1e-12)
        assert characteristic_eval("F1hat", 0.0, spec, c) == pytest.approx(0.0, abs=1e-12)
        assert characteristic_eval("F2", 0.0, spec, c, nl.fprime_at_1) == pytest.approx(nl.fprime_at_1, abs=1e-12)
    assert nl.fprime_at_1 < 0


def test_characteristic_slope_at_zero(spec, default_waves):
    w, wh = default_waves
    m1 = kernel_moment(spec, 1)
    d = 1e-6
    fd = (characteristic_eval("F1", d, spec, w.speed) - characteristic_eval("F1", -d, spec, w.speed)) / (2 * d)
    assert fd == pytest.approx(-m1 - w.speed, abs=1e-7)
    assert characteristic_derivative("F1", 0.0, spec, w.speed) == pytest.approx(fd, abs=1e-7)
    assert fd < 0
    fdh = (characteristic_eval("F1hat", d, spec, wh.speed)
           - characteristic_eval("F1hat", -d, spec, wh.speed)) / (2 * d)
    assert characteristic_derivative(Which.F1HAT, 0.0, spec, wh.speed) == pytest.approx(fdh, abs=1e-7)
    assert fdh < 0


def test_characteristic_outside_window(spec):
    with pytest.raises(DivergenceError):
        characteristic_eval("F1", 2.0, spec, 0.4)
    with pytest.raises(DivergenceError):
        characteristic_eval("F1hat", -2.0, spec, -0.4)


def test_roots_frozen_and_residuals(default_roots, spec, nl, default_waves):
    w, wh = default_waves
    r = default_roots
    for k, v in ROOTS_REF.items():
        assert getattr(r, k) == pytest.approx(v, abs=2e-6)
    assert abs(characteristic_eval("F1", r.mu1, spec, w.speed)) <= 1e-10
    assert abs(characteristic_eval("F2", r.mu21, spec, w.speed, nl.fprime_at_1)) <= 1e-10
    assert abs(characteristic_eval("F2", r.mu22, spec, w.speed, nl.fprime_at_1)) <= 1e-10
    assert abs(characteristic_eval("F1hat", r.mu1_hat, spec, wh.speed)) <= 1e-10
    assert abs(characteristic_eval("F2hat", r.mu21_hat, spec, wh.speed, nl.fprime_at_1)) <= 1e-10
    assert abs(characteristic_eval("F2hat", r.mu22_hat, spec, wh.speed, nl.fprime_at_1)) <= 1e-10
    assert r.mu21 < 0 < r.mu22 and r.mu21_hat < 0 < r.mu22_hat
    assert r.sigma == min(r.mu1, r.mu1_hat)
    assert r.to_dict()["analyticity_window"] == [-1.0, 2.0]


def test_sign_patterns(default_roots, spec, nl, default_waves):
    w, wh = default_waves
    r = default_roots
    assert sign_pattern("F1", spec, w.speed, 0.0, (r.mu1,))
    assert sign_pattern("F2", spec, w.speed, nl.fprime_at_1, (r.mu21, r.mu22))
    assert sign_pattern("F1hat", spec, wh.speed, 0.0, (r.mu1_hat,))
    assert sign_pattern("F2hat", spec, wh.speed, nl.fprime_at_1, (r.mu21_hat, r.mu22_hat))
    # a wrong root must break the pattern
    assert not sign_pattern("F1", spec, w.speed, 0.0, (0.5 * r.mu1,))


def test_convexity(spec, default_waves):
    w, _ = default_waves
    for mu in np.linspace(-0.95, 1.95, 60):
        assert characteristic_derivative("F1", mu, spec, w.speed, order=2) >= 0


def test_symmetric_kernel_reflection_oracle(nl):
    g = gaussian(1.0)
    r = find_roots(g, 0.3, -0.3, nl.fprime_at_1)
    assert r.mu1 == pytest.approx(r.mu1_hat, abs=1e-8)
    assert r.mu21 == pytest.approx(r.mu21_hat, abs=1e-8)


def test_no_positive_root_reported(spec, nl):
    # F1'(0) = -m1 - c >= 0 for c <= -m1: no positive root may be fabricated
    with pytest.raises(RootNotFoundError):
        find_roots(spec, -0.2, -0.5, nl.fprime_at_1)


def synthetic(x, values, ff_left, ff_right, h):
    return GridFunction(float(x[0]), h, values, ff_left, ff_right)


def test_tail_fit_exact_exponential():
    h = 0.05
    x = np.arange(-60, 0 + h / 2, h)
    p = synthetic(x, 2.5 * np.exp(0.4 * x), 0.0, 1.0, h)
    fit = tail_rate_fit(p, "left")
    assert fit.rate == pytest.approx(0.4, abs=1e-10)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert fit.prefactor == pytest.approx(2.5, rel=1e-8)
    right = synthetic(x + 60, 1 - 3.0 * np.exp(-0.7 * (x + 60)), 0.0, 1.0, h)
    assert tail_rate_fit(right, "right").rate == pytest.approx(-0.7, abs=1e-10)


def test_tail_fit_contaminated():
    h = 0.05
    x = np.arange(-80, 0 + h / 2, h)
    mu = 0.5
    p = synthetic(x, np.exp(mu * x) + 3 * np.exp(2 * mu * x), 0.0, 1.0, h)
    assert tail_rate_fit(p, "left").rate == pytest.approx(mu, rel=0.01)


def test_tail_fit_insufficient_and_bad_side():
    h = 1.0
    x = np.arange(-20, 1, h)
    p = synthetic(x, np.exp(x), 0.0, 1.0, h)
    with pytest.raises(InsufficientDataError):
        tail_rate_fit(p, "left")
    with pytest.raises(ValidationError):
        tail_rate_fit(p, "up")


def test_computed_tails(default_waves, default_roots):
    w, wh = default_waves
    r = default_roots
    fit = tail_rate_fit(w.profile, "right")
    assert abs(fit.rate / r.mu21 - 1) <= 0.02 and fit.r2 >= 0.9999
    fith = tail_rate_fit(wh.profile, "left")
    assert abs(fith.rate / -r.mu21_hat - 1) <= 0.02 and fith.r2 >= 0.9999
    left = tail_rate_fit(w.profile, "left")
    # bracket check: not slower than mu1 (up to 5%); the upper end is reported only
    assert left.rate >= 0.95 * r.mu1


def test_ratio_default(default_waves, default_roots, spec):
    w, wh = default_waves
    rd = ratio_diagnostic(w, default_roots.mu1, spec)
    assert rd.branch == RatioBranch.MU1
    rdh = ratio_diagnostic(wh, default_roots.mu1_hat, spec)
    assert rdh.branch == RatioBranch.MU1 and rdh.limit_est < 0


def wave_from(values, x, h, speed=1.0, orient=Orientation.INCREASING):
    prof = GridFunction(float(x[0]), h, values, 0.0, 1.0)
    return WaveSolution(prof, speed, orient, 0.0, "synthetic", 6, sample_kernel(gaussian(1.0), h))


def test_ratio_synthetic_branches():
    h = 0.05
    x = np.arange(-60, 0 + h / 2, h)
    rd = ratio_diagnostic(wave_from(np.exp(0.4 * x), x, h), 0.4)
    assert rd.branch == RatioBranch.MU1 and rd.limit_est == pytest.approx(0.4, rel=1e-6)
    h = 1.0
    x = np.arange(-3000, 1, h)
    with pytest.warns(ZeroBranchWarning):
        rd = ratio_diagnostic(wave_from(np.exp(0.01 * x), x, h), 1.0)
    assert rd.branch == RatioBranch.ZERO


def test_small_support_tophat(tophat_waves, nl):
    spec = top_hat(0.2)
    w, wh = tophat_waves
    r = find_roots(spec, w.speed, wh.speed, nl.fprime_at_1)
    rd = ratio_diagnostic(w, r.mu1, spec)
    assert abs(rd.limit_est - r.mu1) <= 0.15 * r.mu1
    assert abs(rd.limit_est - rd.small_support_estimate) <= 0.15 * rd.small_support_estimate
    rdh = ratio_diagnostic(wh, r.mu1_hat, spec)
    assert abs(-rdh.limit_est - rdh.small_support_estimate) <= 0.15 * rdh.small_support_estimate
