"""Explicit time integration of u_t = J*u - u + f(u) and comparison/regularity probes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationError, ValidationError
from .field import GridFunction, convolve
from .kernel import SampledKernel
from .reaction import IgnitionNonlinearity

RANGE_BUDGET = 1e-6


def stability_budget(nl: IgnitionNonlinearity) -> float:
    return 0.5 / (1.0 + nl.fprime_max_exact)


def rhs(kernel: SampledKernel, nl: IgnitionNonlinearity, values: np.ndarray,
        fl: float, fr: float, template: GridFunction) -> np.ndarray:
    u = GridFunction(template.x0, template.h, values, fl, fr)
    return convolve(kernel, u).values - values + nl.f(values)


@dataclass
class Trajectory:
    times: np.ndarray
    states: list[GridFunction]
    rates: list[GridFunction] = field(repr=False)
    scheme: str = "rk4"
    dt: float = 0.1

    def state_at(self, t: float, atol: float = 1e-9) -> GridFunction:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > atol:
            raise KeyError(f"no recorded state at t={t}")
        return self.states[i]

    @property
    def final(self) -> GridFunction:
        return self.states[-1]


class _Stepper:
    """Advances grid values together with the two far-field constants, which
    follow the scalar ODE  c' = f(c)."""

    def __init__(self, kernel, nl, template: GridFunction):
        self.kernel, self.nl, self.template = kernel, nl, template

    def field(self, v, fl, fr):
        return rhs(self.kernel, self.nl, v, fl, fr, self.template), float(self.nl.f(fl)), float(self.nl.f(fr))

    def step(self, v, fl, fr, dt, scheme):
        if scheme == "euler":
            k, kl, kr = self.field(v, fl, fr)
            return v + dt * k, fl + dt * kl, fr + dt * kr
        k1, l1, r1 = self.field(v, fl, fr)
        k2, l2, r2 = self.field(v + 0.5 * dt * k1, fl + 0.5 * dt * l1, fr + 0.5 * dt * r1)
        k3, l3, r3 = self.field(v + 0.5 * dt * k2, fl + 0.5 * dt * l2, fr + 0.5 * dt * r2)
        k4, l4, r4 = self.field(v + dt * k3, fl + dt * l3, fr + dt * r3)
        return (
            v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4),
            fl + dt / 6.0 * (l1 + 2 * l2 + 2 * l3 + l4),
            fr + dt / 6.0 * (r1 + 2 * r2 + 2 * r3 + r4),
        )


def integrate(
    kernel: SampledKernel,
    nl: IgnitionNonlinearity,
    u0: GridFunction,
    T: float,
    dt: float,
    scheme: str = "rk4",
    record_every: float | None = None,
    t0: float = 0.0,
    check_range: bool = True,
    callback=None,
) -> Trajectory:
    """Integrate from ``t0`` to ``t0 + T``.

    States are recorded at ``t0`` and then every ``record_every`` time units
    (default: only the final state). ``callback(t, state)`` is called at each
    recorded time and may raise to abort.
    """
    if scheme not in ("rk4", "euler"):
        raise ValidationError(f"unknown scheme {scheme!r}")
    if dt <= 0 or T < 0:
        raise ValidationError("need dt > 0 and T >= 0")
    budget = stability_budget(nl)
    if dt > budget + 1e-15:
        raise ValidationError(f"dt={dt} exceeds the stability budget {budget:.4g}")
    vmin, vmax = min(u0.values.min(), u0.farfield_left, u0.farfield_right), \
        max(u0.values.max(), u0.farfield_left, u0.farfield_right)
    if check_range and (vmin < -1e-12 or vmax > 1 + 1e-12):
        raise ValidationError("initial data must take values in [0, 1]")

    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(1.0, T):
        nsteps = int(np.ceil(T / dt))
    stride = None
    if record_every is not None:
        stride = int(round(record_every / dt))
        if stride < 1 or abs(stride * dt - record_every) > 1e-9:
            raise ValidationError("record_every must be a multiple of dt")

    stepper = _Stepper(kernel, nl, u0)
    v, fl, fr = u0.values.copy(), float(u0.farfield_left), float(u0.farfield_right)
    times, states, rates = [], [], []

    def record(step):
        t = t0 + step * dt
        st = u0.with_values(v.copy(), fl, fr)
        times.append(t)
        states.append(st)
        r, rl, rr = stepper.field(v, fl, fr)
        rates.append(u0.with_values(r, rl, rr))
        if callback is not None:
            callback(t, st)

    record(0)
    for k in range(1, nsteps + 1):
        v, fl, fr = stepper.step(v, fl, fr, dt, scheme)
        if check_range:
            lo, hi = v.min(), v.max()
            if not np.isfinite(hi) or lo < -RANGE_BUDGET or hi > 1.0 + RANGE_BUDGET:
                raise IntegrationError(
                    f"solution left [0,1] at t={t0 + k * dt:.4g}: range [{lo:.3g}, {hi:.3g}]",
                    t=t0 + k * dt,
                )
        if (stride is not None and k % stride == 0) or k == nsteps:
            if not times or times[-1] != t0 + k * dt:
                record(k)
    return Trajectory(np.array(times), states, rates, scheme, dt)


@dataclass(frozen=True)
class ComparisonReport:
    max_violation: float
    passed: bool
    tolerance: float

    def to_dict(self) -> dict:
        return {"max_violation": self.max_violation, "passed": self.passed, "tolerance": self.tolerance}


def comparison_test(kernel, nl, u0: GridFunction, v0: GridFunction, T: float, dt: float,
                    scheme: str = "rk4", tol: float = 1e-10) -> ComparisonReport:
    """Integrate an ordered pair u0 <= v0 and report max over (x, t) of (u - v)+."""
    if np.any(u0.values > v0.values) or u0.farfield_left > v0.farfield_left \
            or u0.farfield_right > v0.farfield_right:
        raise ValidationError("comparison_test needs u0 <= v0")
    worst = [0.0]
    tu = integrate(kernel, nl, u0, T, dt, scheme, record_every=dt)
    tv = integrate(kernel, nl, v0, T, dt, scheme, record_every=dt)
    for a, b in zip(tu.states, tv.states):
        worst[0] = max(worst[0], float(np.max(a.values - b.values, initial=0.0)))
    return ComparisonReport(worst[0], worst[0] <= tol, tol)


def regularity_probe(traj: Trajectory, eta: float) -> tuple[float, float]:
    """Empirical sup over (x, t) of |u(x+eta) - u(x)|/eta and the same for u_t.

    u_t is the recorded right-hand side, not a time difference.
    """
    h = traj.states[0].h
    m = int(round(eta / h))
    if m < 1 or abs(m * h - eta) > 1e-9 * max(h, eta):
        raise ValidationError("eta must be a positive multiple of the grid spacing")
    c1 = c2 = 0.0
    for s, r in zip(traj.states, traj.rates):
        c1 = max(c1, float(np.max(np.abs(s.values[m:] - s.values[:-m]), initial=0.0)) / eta)
        c2 = max(c2, float(np.max(np.abs(r.values[m:] - r.values[:-m]), initial=0.0)) / eta)
    return c1, c2


def random_ordered_pair(rng: np.random.Generator, x0: float, h: float, n: int,
                        bumps: int = 6) -> tuple[GridFunction, GridFunction]:
    """Smooth random u0 <= v0 with values in [0, 1] and ordered far fields.

    u0 is a random step between two far-field levels plus Gaussian bumps;
    v0 adds a nonnegative random perturbation. Both are clipped to [0, 1],
    which preserves the order.
    """
    x = x0 + h * np.arange(n)
    span = x[-1] - x[0]
    a, b = np.sort(rng.uniform(0.0, 1.0, 2))[:: rng.choice([-1, 1])]
    center = rng.uniform(x[0] + 0.25 * span, x[-1] - 0.25 * span)
    width = rng.uniform(0.5, 5.0)
    u = a + (b - a) * 0.5 * (1.0 + np.tanh((x - center) / width))
    for _ in range(bumps):
        m, s, amp = rng.uniform(x[0], x[-1]), rng.uniform(0.3, 4.0), rng.uniform(-0.6, 0.6)
        u = u + amp * np.exp(-0.5 * ((x - m) / s) ** 2)
    u = np.clip(u, 0.0, 1.0)
    d = np.zeros(n)
    for _ in range(bumps):
        m, s, amp = rng.uniform(x[0], x[-1]), rng.uniform(0.3, 4.0), rng.uniform(0.0, 0.5)
        d = d + amp * np.exp(-0.5 * ((x - m) / s) ** 2)
    lift_l, lift_r = rng.uniform(0.0, 0.2, 2)
    v = np.clip(u + d, 0.0, 1.0)
    ul, ur = float(u[0]), float(u[-1])
    vl, vr = min(1.0, max(float(v[0]), ul + lift_l)), min(1.0, max(float(v[-1]), ur + lift_r))
    return GridFunction(x0, h, u, ul, ur), GridFunction(x0, h, v, vl, vr)
