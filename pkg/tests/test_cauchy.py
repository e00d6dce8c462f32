from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from nlignite.cauchy import (comparison_test, integrate, random_ordered_pair, regularity_probe,
                             stability_budget)
from nlignite.errors import ValidationError
from nlignite.field import GridFunction, derivative
from nlignite.kernel import example_2_1, gaussian, sample_kernel


@pytest.fixture(scope="module")
def kern():
    return sample_kernel(example_2_1(), 0.1)


def const(c, n=301, h=0.1):
    return GridFunction(-15.0, h, np.full(n, c), c, c)


def test_stability_budget(nl):
    assert stability_budget(nl) == pytest.approx(0.5 / 1.5, rel=1e-10)


@pytest.mark.parametrize("c", [0.0, 0.25, 1.0])
def test_equilibria_are_fixed(kern, nl, c):
    tr = integrate(kern, nl, const(c), 5.0, 0.1)
    assert np.max(np.abs(tr.final.values - c)) <= 5e-12
    assert tr.times[-1] == pytest.approx(5.0, abs=1e-12)


def test_uniform_state_follows_scalar_ode(kern, nl):
    c0 = nl.rho + 0.01
    tr = integrate(kern, nl, const(c0), 60.0, 0.05, record_every=10.0)
    ode = solve_ivp(lambda t, y: nl.f(np.clip(y, 0, 2)), (0, 60), [c0], t_eval=tr.times,
                    method="DOP853", rtol=1e-13, atol=1e-14)
    for s, y in zip(tr.states, ode.y[0]):
        assert np.max(np.abs(s.values - y)) <= 1e-8
    # f ~ (u - rho)^3 near the threshold, so the climb toward 1 starts slowly but strictly
    means = [s.values[0] for s in tr.states]
    assert all(b > a for a, b in zip(means, means[1:])) and means[-1] < 1.0


def test_range_preserved(kern, nl, rng):
    u0, _ = random_ordered_pair(rng, -15.0, 0.1, 301)
    tr = integrate(kern, nl, u0, 10.0, 0.1, record_every=0.5)
    lo = min(s.values.min() for s in tr.states)
    hi = max(s.values.max() for s in tr.states)
    assert lo >= -1e-10 and hi <= 1 + 1e-10


def test_rates_are_the_right_hand_side(kern, nl, rng):
    from nlignite.field import apply_operator
    u0, _ = random_ordered_pair(rng, -15.0, 0.1, 301)
    tr = integrate(kern, nl, u0, 1.0, 0.1, record_every=0.5)
    for s, r in zip(tr.states, tr.rates):
        np.testing.assert_allclose(r.values, apply_operator(kern, nl, s).values, atol=1e-14)


def test_rk4_order(nl):
    k = sample_kernel(gaussian(1.0), 0.1)
    u0 = GridFunction.on_window(-20, 20, 0.1, lambda x: 0.5 * (1 + np.tanh(x)), 0.0, 1.0)
    finals = [integrate(k, nl, u0, 4.0, dt).final.values for dt in (0.2, 0.1, 0.05)]
    e1 = np.max(np.abs(finals[0] - finals[1]))
    e2 = np.max(np.abs(finals[1] - finals[2]))
    assert np.log2(e1 / e2) >= 3.5


def test_rejects_bad_input(kern, nl):
    with pytest.raises(ValidationError):
        integrate(kern, nl, const(0.5), 1.0, 0.5)  # above the stability budget
    with pytest.raises(ValidationError):
        integrate(kern, nl, const(1.2), 1.0, 0.1)
    with pytest.raises(ValidationError):
        integrate(kern, nl, const(0.5), 1.0, 0.1, record_every=0.15)
    with pytest.raises(ValidationError):
        integrate(kern, nl, const(0.5), 1.0, 0.1, scheme="leapfrog")


def test_comparison_identical_pair(kern, nl, rng):
    u0, _ = random_ordered_pair(rng, -15.0, 0.1, 301)
    rep = comparison_test(kern, nl, u0, u0, 5.0, 0.1)
    assert rep.max_violation == 0.0 and rep.passed


def test_comparison_bump_pair(kern, nl):
    bump = lambda x: np.exp(-0.5 * x**2)
    u0 = GridFunction.on_window(-15, 15, 0.1, lambda x: 0.3 * bump(x), 0.0, 0.0)
    v0 = GridFunction.on_window(-15, 15, 0.1, lambda x: 0.6 * bump(x), 0.0, 0.0)
    rep = comparison_test(kern, nl, u0, v0, 10.0, 0.1)
    assert rep.passed and rep.max_violation <= 1e-10


def test_comparison_requires_order(kern, nl):
    with pytest.raises(ValidationError):
        comparison_test(kern, nl, const(0.6), const(0.5), 1.0, 0.1)


def test_random_pairs_are_ordered(rng):
    for _ in range(20):
        u, v = random_ordered_pair(rng, -30.0, 0.1, 601)
        assert np.all(u.values <= v.values)
        assert u.farfield_left <= v.farfield_left and u.farfield_right <= v.farfield_right
        assert 0 <= u.values.min() and v.values.max() <= 1


def test_random_pairs_reproducible():
    a = random_ordered_pair(np.random.default_rng(3), -30.0, 0.1, 601)
    b = random_ordered_pair(np.random.default_rng(3), -30.0, 0.1, 601)
    np.testing.assert_array_equal(a[0].values, b[0].values)
    np.testing.assert_array_equal(a[1].values, b[1].values)


def test_regularity_probe_constant(kern, nl):
    tr = integrate(kern, nl, const(0.7), 2.0, 0.1, record_every=0.5)
    assert regularity_probe(tr, 0.2) == (0.0, 0.0)


def test_regularity_probe_rejects_off_grid_eta(kern, nl):
    tr = integrate(kern, nl, const(0.7), 1.0, 0.1)
    with pytest.raises(ValidationError):
        regularity_probe(tr, 0.15)


def test_regularity_probe_on_travelling_wave(default_waves, nl):
    w, _ = default_waves
    tr = integrate(w.kernel, nl, w.profile, 4.0, 0.05, record_every=1.0)
    sup_dphi = np.max(np.abs(derivative(w.profile).values))
    c1, c2 = regularity_probe(tr, 0.05)
    c1_half, c2_half = regularity_probe(tr, 0.1)
    assert c1 == pytest.approx(sup_dphi, rel=0.05)
    assert abs(c1 - c1_half) <= 0.05 * c1
    assert abs(c2 - c2_half) <= 0.05 * c2
