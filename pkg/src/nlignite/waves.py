"""Traveling fronts  c phi' = J*phi - phi + f(phi)  by Newton on the grid and by front tracking.

The nonincreasing front (1 -> 0) is obtained from the nondecreasing front of the
reflected kernel y -> J(-y): phi_hat(s) = psi(-s), c_hat = -c_psi.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy import linalg, optimize, stats

from .cauchy import integrate
from .errors import (ConvergenceError, InvariantViolation, NonConvergenceError, ValidationError,
                     WindowError, ZeroSpeedError)
from .field import (GridFunction, Interpolant, convolution_matrix, convolve, derivative,
                    derivative_matrix, level_crossing, resample)
from .kernel import KernelSpec, SampledKernel, kernel_moment, kernel_reflect, sample_kernel
from .reaction import IgnitionNonlinearity

log = logging.getLogger(__name__)

ZERO_SPEED_GUARD = 1e-4
DEFAULT_WINDOW = (-60.0, 60.0)
DEFAULT_H = 0.05
DEFAULT_FD_ORDER = 6


class Orientation(str, Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"


class SpeedClass(str, Enum):
    BOTH_POSITIVE = "both_positive"
    C_POS_CHAT_NEG = "c_pos_chat_neg"
    BOTH_NEGATIVE = "both_negative"


@dataclass(frozen=True)
class WaveSolution:
    """A front with phi(0) = rho (increasing) or phi_hat(0) = rho (decreasing)."""

    profile: GridFunction
    speed: float
    orientation: Orientation
    residual_norm: float
    method: str = "newton"
    fd_order: int = DEFAULT_FD_ORDER
    kernel: SampledKernel | None = field(default=None, repr=False)
    info: dict = field(default_factory=dict, repr=False)

    @property
    def h(self) -> float:
        return self.profile.h

    def summary(self) -> dict:
        return {
            "speed": self.speed,
            "orientation": self.orientation.value,
            "residual_norm": self.residual_norm,
            "method": self.method,
            "h": self.profile.h,
            "window": [self.profile.x0, self.profile.x_end],
            **{k: v for k, v in self.info.items() if isinstance(v, (int, float, str))},
        }


def _sampled(kernel: KernelSpec | SampledKernel, h: float) -> SampledKernel:
    if isinstance(kernel, SampledKernel):
        return kernel
    return sample_kernel(kernel, h)


def kernel_radius(kernel: SampledKernel) -> float:
    """Root-mean-square jump length, used as the kernel's length scale."""
    return float(np.sqrt(kernel.moment(2)))


def wave_residual(kernel: SampledKernel, nl: IgnitionNonlinearity, profile: GridFunction,
                  speed: float, fd_order: int = DEFAULT_FD_ORDER) -> np.ndarray:
    """c*D(phi) - (J*phi - phi + f(phi)) at every window node."""
    d = derivative(profile, fd_order).values
    # f vanishes below rho, so evaluating it at max(u, 0) extends it exactly; the
    # far tail of a discrete front may dip a few ulps below zero.
    fu = nl.f(np.clip(profile.values, 0.0, 2.0))
    return speed * d - (convolve(kernel, profile).values - profile.values + fu)


def _phase_row(profile: GridFunction, at: float = 0.0) -> tuple[np.ndarray, float]:
    """Linear-interpolation weights e with  e . values = u(at)."""
    s = (at - profile.x0) / profile.h
    i = int(np.floor(s))
    if not (0 <= i < profile.n - 1):
        raise ValidationError("phase point lies outside the window")
    t = s - i
    e = np.zeros(profile.n)
    e[i] += 1.0 - t
    if t:
        e[i + 1] += t
    return e, float(e @ profile.values)


def tanh_guess(window=DEFAULT_WINDOW, h=DEFAULT_H, rho=0.25, width=2.0) -> GridFunction:
    """Increasing ramp 0 -> 1 with value rho at x = 0."""
    shift = width * np.arctanh(2 * rho - 1)
    return GridFunction.on_window(window[0], window[1], h,
                                  lambda x: 0.5 * (1 + np.tanh((x + shift) / width)), 0.0, 1.0)


def _newton_step(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A x = b by LU, falling back to QR when LU's residual is poor.

    Partial pivoting can suffer exponential element growth on banded
    boundary-value matrices like this one even when A is well conditioned.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        x = linalg.solve(A, b, check_finite=False)
    scale = np.abs(A).max() * np.abs(x).max() + np.abs(b).max()
    if np.all(np.isfinite(x)) and np.abs(A @ x - b).max() <= 1e-10 * scale:
        return x
    log.debug("LU residual too large; re-solving the Newton step by QR")
    q, r = linalg.qr(A, check_finite=False)
    return linalg.solve_triangular(r, q.T @ b, check_finite=False)


def solve_wave_newton(
    kernel: KernelSpec | SampledKernel,
    nl: IgnitionNonlinearity,
    initial_guess: GridFunction | None = None,
    tol: float = 1e-10,
    *,
    speed_guess: float | None = None,
    window: tuple[float, float] = DEFAULT_WINDOW,
    h: float = DEFAULT_H,
    fd_order: int = DEFAULT_FD_ORDER,
    max_iter: int = 60,
    polish: int = 2,
) -> WaveSolution:
    """Newton's method for (phi, c) on the window with phi(0) = rho.

    Unknowns are the window values and c; outside the window phi is clamped to
    0 (left) and 1 (right). The Jacobian is assembled exactly: the convolution
    is linear and f' is known in closed form.
    """
    kern = _sampled(kernel, h)
    if initial_guess is None:
        initial_guess = tanh_guess(window, kern.h, nl.rho)
    if abs(initial_guess.h - kern.h) > 1e-12:
        raise ValidationError("initial guess and kernel use different grid spacings")
    phi = initial_guess.with_values(initial_guess.values.copy(), 0.0, 1.0)
    n = phi.n
    if speed_guess is None:
        speed_guess = -kern.moment(1) + kern.h * float(np.sum(nl.f(np.clip(phi.values, 0, 1))))
    c = float(speed_guess)

    K = convolution_matrix(kern, n)
    D = derivative_matrix(n, kern.h, fd_order)
    e_phase, _ = _phase_row(phi)
    eye = np.eye(n)

    def residual(vals, speed):
        g = phi.with_values(vals)
        r = wave_residual(kern, nl, g, speed, fd_order)
        return np.concatenate([r, [e_phase @ vals - nl.rho]])

    vals = phi.values.copy()
    R = residual(vals, c)
    norm = float(np.max(np.abs(R)))
    best = (vals.copy(), c, norm)
    history = [norm]
    converged_at = None
    for it in range(max_iter):
        if converged_at is not None and it - converged_at >= polish:
            break
        A = np.empty((n + 1, n + 1))
        A[:n, :n] = c * D - K + eye
        A[np.arange(n), np.arange(n)] -= nl.f_prime(np.clip(vals, 0.0, 2.0))
        A[:n, n] = derivative(phi.with_values(vals), fd_order).values
        A[n, :n] = e_phase
        A[n, n] = 0.0
        try:
            step = _newton_step(A, -R)
        except linalg.LinAlgError as exc:
            raise NonConvergenceError(f"singular Newton matrix: {exc}", best=best) from exc
        lam, accepted = 1.0, False
        for _ in range(6):
            trial_vals = np.clip(vals + lam * step[:n], -1.0, 2.0)
            trial_c = c + lam * step[n]
            Rt = residual(trial_vals, trial_c)
            nt = float(np.max(np.abs(Rt)))
            if nt < norm or (converged_at is not None and nt <= norm * 1.5):
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            if norm <= tol:
                break
            raise NonConvergenceError(
                f"Newton stagnated at residual {norm:.3e} after {it} iterations", best=best,
                residual=norm)
        vals, c, R, norm = trial_vals, trial_c, Rt, nt
        history.append(norm)
        if norm < best[2]:
            best = (vals.copy(), c, norm)
        if norm <= tol and converged_at is None:
            converged_at = it
    vals, c, norm = best
    if norm > tol:
        raise NonConvergenceError(f"Newton did not reach tol={tol:g} (residual {norm:.3e})",
                                  best=best, residual=norm)
    prof = phi.with_values(vals, 0.0, 1.0)
    return WaveSolution(prof, float(c), Orientation.INCREASING, norm, "newton", fd_order, kern,
                        {"iterations": len(history) - 1})


def _recentered(u: GridFunction, level: float, window, h) -> GridFunction:
    x_level = level_crossing(u, level)
    n = int(round((window[1] - window[0]) / h)) + 1
    return resample(u, window[0], n, offset=x_level)


def solve_wave_tracking(
    kernel: KernelSpec | SampledKernel,
    nl: IgnitionNonlinearity,
    window: tuple[float, float] = DEFAULT_WINDOW,
    dt: float = 0.1,
    T: float | None = None,
    *,
    h: float = DEFAULT_H,
    level: float = 0.5,
    pilot: float = 10.0,
    sample_every: float = 0.5,
    margin_radii: float = 10.0,
    fd_order: int = DEFAULT_FD_ORDER,
    r2_min: float = 0.999,
) -> WaveSolution:
    """Front speed from the drift of the level-``level`` crossing.

    A short pilot run fixes the direction of motion; the main run starts the
    step near the upstream side of the window so the front has room to travel.
    With u(x,t) = phi(x + ct) the crossing moves at -c, hence c = -slope.
    """
    kern = _sampled(kernel, h)
    lo, hi = window
    margin = margin_radii * kernel_radius(kern)
    if hi - lo <= 2 * margin + 10:
        raise WindowError("window too small for the requested boundary margin")

    def step_at(xs):
        return GridFunction.on_window(lo, hi, kern.h, lambda x: 0.5 * (1 + np.tanh(x - xs)), 0.0, 1.0)

    pilot_traj = integrate(kern, nl, step_at(0.5 * (lo + hi)), pilot, dt, record_every=pilot)
    x_a = level_crossing(pilot_traj.states[0], level)
    x_b = level_crossing(pilot_traj.states[-1], level)
    velocity = (x_b - x_a) / pilot
    start = hi - margin - 5.0 if velocity < 0 else lo + margin + 5.0
    if T is None:
        room = (hi - lo) - 2 * margin - 10.0
        T = float(min(80.0, 0.9 * room / max(abs(velocity), 1e-3)))
        T = max(sample_every * 40, round(T / sample_every) * sample_every)

    times, crossings = [], []

    def watch(t, state):
        xc = level_crossing(state, level)
        if xc < lo + margin or xc > hi - margin:
            raise WindowError(f"front at x={xc:.3f} reached the boundary margin at t={t:.2f}", t=t)
        times.append(t)
        crossings.append(xc)

    traj = integrate(kern, nl, step_at(start), T, dt, record_every=sample_every, callback=watch)
    times_a, cross_a = np.array(times), np.array(crossings)
    half = times_a >= times_a[-1] / 2
    fit = stats.linregress(times_a[half], cross_a[half])
    r2 = fit.rvalue**2
    if r2 < r2_min:
        raise ConvergenceError(f"crossing drift is not stationary (R^2={r2:.5f})", r2=r2)
    speed = -float(fit.slope)
    prof = _recentered(traj.final, nl.rho, window, kern.h)
    prof = prof.with_values(prof.values, 0.0, 1.0)
    res = float(np.max(np.abs(wave_residual(kern, nl, prof, speed, fd_order))))
    return WaveSolution(prof, speed, Orientation.INCREASING, res, "tracking", fd_order, kern,
                        {"T": float(T), "r2": float(r2), "pilot_velocity": float(velocity)})


def reflect_solution(psi: WaveSolution, kernel: SampledKernel | None = None) -> WaveSolution:
    """Map the increasing front of the reflected problem to the decreasing front."""
    p = psi.profile
    vals = p.values[::-1].copy()
    prof = GridFunction(-p.x_end, p.h, vals, p.farfield_right, p.farfield_left)
    kern = kernel if kernel is not None else (psi.kernel.reversed() if psi.kernel is not None else None)
    orient = Orientation.DECREASING if psi.orientation == Orientation.INCREASING else Orientation.INCREASING
    return WaveSolution(prof, -psi.speed, orient, psi.residual_norm, psi.method, psi.fd_order, kern,
                        dict(psi.info))


def solve_wave(kernel: KernelSpec, nl: IgnitionNonlinearity, orientation: Orientation = Orientation.INCREASING,
               method: str = "newton", **kw) -> WaveSolution:
    """Increasing or decreasing front; the decreasing one goes through reflection."""
    spec = kernel if orientation == Orientation.INCREASING else kernel_reflect(kernel)
    if method == "newton":
        newton_kw = {k: v for k, v in kw.items() if k in ("tol", "window", "h", "fd_order", "max_iter",
                                                          "polish", "speed_guess", "initial_guess")}
        try:
            w = solve_wave_newton(spec, nl, **newton_kw)
        except NonConvergenceError:
            log.info("Newton from a tanh guess failed; seeding from front tracking")
            track_kw = {k: v for k, v in kw.items() if k in ("window", "h", "dt", "fd_order")}
            tr = solve_wave_tracking(spec, nl, **track_kw)
            newton_kw.update(initial_guess=tr.profile, speed_guess=tr.speed)
            w = solve_wave_newton(spec, nl, **newton_kw)
    elif method == "tracking":
        track_kw = {k: v for k, v in kw.items() if k in ("window", "h", "dt", "T", "fd_order", "level")}
        w = solve_wave_tracking(spec, nl, **track_kw)
    else:
        raise ValidationError(f"unknown wave method {method!r}")
    if orientation == Orientation.DECREASING:
        w = reflect_solution(w)
    return w


def speed_identity_check(wave: WaveSolution, kernel: KernelSpec, nl: IgnitionNonlinearity,
                         m1: float | None = None) -> float:
    """|c + m1 - int f(phi)| (increasing) or |c_hat + m1 + int f(phi_hat)| (decreasing)."""
    if m1 is None:
        m1 = kernel_moment(kernel, 1)
    p = wave.profile
    integral = float(np.trapezoid(nl.f(np.clip(p.values, 0.0, 2.0)), dx=p.h))
    if wave.orientation == Orientation.INCREASING:
        return abs(wave.speed + m1 - integral)
    return abs(wave.speed + m1 + integral)


def reaction_integral(wave: WaveSolution, nl: IgnitionNonlinearity) -> float:
    p = wave.profile
    return float(np.trapezoid(nl.f(np.clip(p.values, 0.0, 2.0)), dx=p.h))


def classify_speeds(c: float, c_hat: float, guard: float = ZERO_SPEED_GUARD) -> SpeedClass:
    if abs(c) < guard or abs(c_hat) < guard:
        raise ZeroSpeedError(
            f"speed below the zero-speed guard {guard:g} (c={c:.3g}, c_hat={c_hat:.3g}); "
            "standing fronts are outside the supported setting"
        )
    if c < 0 < c_hat:
        raise InvariantViolation(f"c={c:.6g} < 0 < c_hat={c_hat:.6g} is impossible; solver bug")
    if c <= c_hat:
        raise InvariantViolation(f"expected c > c_hat, got c={c:.6g}, c_hat={c_hat:.6g}")
    if c > 0 and c_hat > 0:
        return SpeedClass.BOTH_POSITIVE
    if c > 0 > c_hat:
        return SpeedClass.C_POS_CHAT_NEG
    return SpeedClass.BOTH_NEGATIVE


def is_monotone(wave: WaveSolution, tol: float = 1e-10) -> bool:
    d = np.diff(wave.profile.values)
    if wave.orientation == Orientation.INCREASING:
        return bool(d.min() >= -tol)
    return bool(d.max() <= tol)


class ProfileEvaluator:
    """Off-grid evaluation of a front, its derivative and its convolution.

    The derivative is the discrete one used by the solver, and J*phi is the
    grid convolution, each interpolated; ``offset`` translates the profile so
    that evaluate(xi) returns phi(xi + offset).
    """

    def __init__(self, wave: WaveSolution, offset: float = 0.0, degree: int = 7):
        if wave.kernel is None:
            raise ValidationError("wave carries no sampled kernel")
        self.wave = wave
        self.offset = float(offset)
        p = wave.profile
        self._u = Interpolant(p, degree)
        self._du = Interpolant(derivative(p, wave.fd_order), degree)
        self._ju = Interpolant(convolve(wave.kernel, p), degree)

    def shifted(self, by: float) -> "ProfileEvaluator":
        new = object.__new__(ProfileEvaluator)
        new.__dict__.update(self.__dict__)
        new.offset = self.offset + by
        return new

    def __call__(self, xi):
        return self._u(np.asarray(xi, dtype=float) + self.offset)

    def deriv(self, xi):
        return self._du(np.asarray(xi, dtype=float) + self.offset)

    def conv(self, xi):
        return self._ju(np.asarray(xi, dtype=float) + self.offset)

    def crossing(self, level: float) -> float:
        """xi with phi(xi + offset) = level, solved on the interpolant itself."""
        p = self.wave.profile
        if self.wave.orientation == Orientation.INCREASING:
            guess = level_crossing(p, level) - self.offset
        else:
            guess = _decreasing_crossing(p, level) - self.offset
        g = lambda xi: float(self(xi)) - level
        a, b = guess - p.h, guess + p.h
        if g(a) * g(b) > 0:
            return guess
        return float(optimize.brentq(g, a, b, xtol=1e-14))


def _decreasing_crossing(u: GridFunction, level: float) -> float:
    return level_crossing(u.with_values(-u.values, -u.farfield_left, -u.farfield_right), -level)


def with_profile(wave: WaveSolution, profile: GridFunction) -> WaveSolution:
    return replace(wave, profile=profile)
