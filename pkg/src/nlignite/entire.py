"""Front-like entire solution built from an increasing and a decreasing front.

Ingredients, for fronts phi (speed c, 0 -> 1) and phi_hat (speed c_hat, 1 -> 0):

* p(t) solving p' = c0 + N exp(sigma p) on t <= 0, in closed form;
* the supersolution  u_bar = phi(x + cbar t + p(t)) + phi_hat(x + cbar t - p(t));
* the subsolution    u_low = max{phi(x + c t + theta), phi_hat(x + c_hat t - theta)};
* Cauchy problems started from u_low at t = -n, whose solutions increase with n
  and converge to the entire solution.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import stats

from .cauchy import Trajectory, integrate, regularity_probe, stability_budget
from .errors import (ConfigurationError, ConstructionError, DomainError, InsufficientDataError,
                     TailConditionError, ValidationError)
from .field import GridFunction, derivative
from .reaction import IgnitionNonlinearity, ReactionConstants, derive_constants
from .spectral import CharacteristicRoots
from .waves import (Orientation, ProfileEvaluator, SpeedClass, WaveSolution, classify_speeds,
                    kernel_radius)

log = logging.getLogger(__name__)

TAIL_FLOOR = 1e-8
SANDWICH_TOL = 1e-6
MONOTONE_TOL = 1e-8
UPPER_TOL = 1e-10


# ----------------------------------------------------------------------------
# the phase function p(t)


@dataclass(frozen=True)
class PParams:
    c0: float
    cbar: float
    N: float
    sigma: float
    p0: float = -1.0

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValidationError(f"c0 must be positive, got {self.c0}")
        if not self.N > 0 or not self.sigma > 0:
            raise ValidationError("N and sigma must be positive")
        if not self.p0 < 0:
            raise ValidationError("p0 must be negative")

    @classmethod
    def from_speeds(cls, c: float, c_hat: float, N: float, sigma: float, p0: float = -1.0) -> "PParams":
        return cls(c0=0.5 * (c - c_hat), cbar=0.5 * (c + c_hat), N=N, sigma=sigma, p0=p0)

    @property
    def r(self) -> float:
        return self.N / self.c0 * math.exp(self.sigma * self.p0)

    @property
    def omega(self) -> float:
        return self.p0 - math.log1p(self.r) / self.sigma

    @property
    def K(self) -> float:
        """Smallest K with p(t) - c0 t - omega <= K exp(c0 sigma t) for all t <= 0.

        With q = r/(1+r) and y = exp(c0 sigma t) the ratio is -ln(1 - q y)/(sigma y),
        which increases with y, so the supremum sits at t = 0.
        """
        return math.log1p(self.r) / self.sigma

    def p(self, t):
        return p_closed_form(self, t)

    def p_prime(self, t):
        return self.c0 + self.N * np.exp(self.sigma * p_closed_form(self, t))

    def to_dict(self) -> dict:
        return {"c0": self.c0, "cbar": self.cbar, "N": self.N, "sigma": self.sigma, "p0": self.p0,
                "r": self.r, "omega": self.omega, "K": self.K}


def p_closed_form(params: PParams, t):
    """p(t) = c0 t + omega - ln(1 - r/(1+r) exp(c0 sigma t)) / sigma, t <= 0."""
    ta = np.asarray(t, dtype=float)
    if np.any(ta > 0):
        raise DomainError("p(t) is only used for t <= 0")
    q = params.r / (1.0 + params.r)
    s = params.c0 * params.sigma * ta
    out = params.c0 * ta + params.omega - np.log1p(-q * np.exp(s)) / params.sigma
    return float(out) if np.ndim(out) == 0 else out


def p_ode_rk4(params: PParams, t_end: float = -20.0, dt: float = 1e-3) -> tuple[np.ndarray, np.ndarray]:
    """Integrate p' = c0 + N exp(sigma p) backwards from p(0) = p0 with classical RK4."""
    if t_end >= 0:
        raise DomainError("integrate towards negative times")
    n = int(round(-t_end / dt))
    h = t_end / n
    g = lambda p: params.c0 + params.N * math.exp(params.sigma * p)
    ts = h * np.arange(n + 1)
    ps = np.empty(n + 1)
    ps[0] = params.p0
    p = params.p0
    for i in range(n):
        k1 = g(p)
        k2 = g(p + 0.5 * h * k1)
        k3 = g(p + 0.5 * h * k2)
        k4 = g(p + h * k3)
        p = p + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        ps[i + 1] = p
    return ts, ps


def n_star(L: float, A1: float, A1_hat: float, k: float, k_hat: float) -> float:
    """max{L A1_hat / k, L A1 / k_hat, L A1 / k, L A1_hat / k_hat}."""
    if not k > 0 or not k_hat > 0:
        raise TailConditionError(
            f"tail condition constants must be positive (k={k:.3g}, k_hat={k_hat:.3g}); "
            "phi'/phi appears to tend to 0 in the far tail, so no supersolution of this form exists",
            k=k, k_hat=k_hat)
    return max(L * A1_hat / k, L * A1 / k_hat, L * A1 / k, L * A1_hat / k_hat)


# ----------------------------------------------------------------------------
# normalised fronts and measured constants


@dataclass
class FrontPair:
    """Both fronts translated so phi >= 1 - m0 on xi >= 0 and phi_hat >= 1 - m0 on xi_hat <= 0."""

    wave: WaveSolution
    wave_hat: WaveSolution
    phi: ProfileEvaluator
    phi_hat: ProfileEvaluator
    roots: CharacteristicRoots
    constants: ReactionConstants
    nl: IgnitionNonlinearity
    k: float
    k_hat: float
    A1: float
    A1_hat: float

    @property
    def c(self) -> float:
        return self.wave.speed

    @property
    def c_hat(self) -> float:
        return self.wave_hat.speed

    @property
    def sigma(self) -> float:
        return min(self.roots.mu1, self.roots.mu1_hat)

    @property
    def n_star(self) -> float:
        return n_star(self.constants.L, self.A1, self.A1_hat, self.k, self.k_hat)

    @property
    def h(self) -> float:
        return self.wave.profile.h

    def params(self, n_factor: float = 2.0, p0: float = -1.0) -> PParams:
        return PParams.from_speeds(self.c, self.c_hat, n_factor * self.n_star, self.sigma, p0)

    def to_dict(self) -> dict:
        return {"c": self.c, "c_hat": self.c_hat, "k": self.k, "k_hat": self.k_hat, "A1": self.A1,
                "A1_hat": self.A1_hat, "L": self.constants.L, "m0": self.constants.m0,
                "sigma": self.sigma, "n_star": self.n_star,
                "offset_phi": self.phi.offset, "offset_phi_hat": self.phi_hat.offset}


def prepare_pair(wave: WaveSolution, wave_hat: WaveSolution, roots: CharacteristicRoots,
                 nl: IgnitionNonlinearity, constants: ReactionConstants | None = None,
                 floor: float = TAIL_FLOOR) -> FrontPair:
    """Normalise both fronts with m0 and measure k, k_hat, A1, A1_hat on the grid.

    Tail quantities are taken only where the front exceeds ``floor``; below it
    the truncated window, not the equation, shapes the profile.
    """
    if wave.orientation != Orientation.INCREASING or wave_hat.orientation != Orientation.DECREASING:
        raise ValidationError("need an increasing and a decreasing front")
    constants = constants or derive_constants(nl)
    m0 = constants.m0
    if not 0.0 < m0 < 1.0 - nl.rho:
        raise ConfigurationError(f"m0={m0} cannot be used to normalise the fronts")
    level = 1.0 - m0

    try:
        ev = ProfileEvaluator(wave)
        ev = ev.shifted(ev.crossing(level))
        evh = ProfileEvaluator(wave_hat)
        evh = evh.shifted(evh.crossing(level))
    except Exception as exc:  # crossing not on the grid
        raise ConfigurationError(f"cannot normalise fronts at level 1 - m0 = {level}: {exc}") from exc

    p, ph = wave.profile, wave_hat.profile
    xi = p.x - ev.offset
    xih = ph.x - evh.offset
    dp = derivative(p, wave.fd_order).values
    dph = derivative(ph, wave_hat.fd_order).values

    sel = (xi <= 0) & (p.values >= floor)
    selh = (xih >= 0) & (ph.values >= floor)
    if sel.sum() < 10 or selh.sum() < 10:
        raise InsufficientDataError("too few tail nodes above the floor to measure k, k_hat")
    k = float(np.min(dp[sel] / p.values[sel]))
    k_hat = float(np.min(-dph[selh] / ph.values[selh]))

    mu1, mu1h = roots.mu1, roots.mu1_hat
    up = p.values >= floor
    uph = ph.values >= floor
    A1 = float(np.max(p.values[up] * np.exp(-mu1 * xi[up])))
    A1_hat = float(np.max(ph.values[uph] * np.exp(mu1h * xih[uph])))
    return FrontPair(wave, wave_hat, ev, evh, roots, constants, nl, k, k_hat, A1, A1_hat)


# ----------------------------------------------------------------------------
# sub- and supersolution


def subsolution(pair: FrontPair, theta: float, x, t: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.maximum(pair.phi(x + pair.c * t + theta), pair.phi_hat(x + pair.c_hat * t - theta))


def supersolution(pair: FrontPair, params: PParams, x, t: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    z = x + params.cbar * t
    p = params.p(t)
    return pair.phi(z + p) + pair.phi_hat(z - p)


def supersolution_residual(pair: FrontPair, params: PParams, z, t: float) -> np.ndarray:
    """u_t - (J*u - u) - f(u) for u_bar, written in z = x + cbar t.

    u_t uses the chain rule with the solver's discrete derivatives; J*phi is
    the grid convolution of the front, interpolated.
    """
    z = np.asarray(z, dtype=float)
    p, pp = params.p(t), params.p_prime(t)
    a, b = z + p, z - p
    u, du, ju = pair.phi(a), pair.phi.deriv(a), pair.phi.conv(a)
    v, dv, jv = pair.phi_hat(b), pair.phi_hat.deriv(b), pair.phi_hat.conv(b)
    ut = (params.cbar + pp) * du + (params.cbar - pp) * dv
    return ut - (ju - u) - (jv - v) - pair.nl.f(np.clip(u + v, 0.0, 2.0))


@dataclass(frozen=True)
class SupersolutionReport:
    min_residual: float
    argmin_z: float
    argmin_t: float
    tol: float
    passed: bool
    N: float
    n_star: float

    def to_dict(self) -> dict:
        return {"min_residual": self.min_residual, "argmin_z": self.argmin_z,
                "argmin_t": self.argmin_t, "tol": self.tol, "passed": self.passed,
                "N": self.N, "n_star": self.n_star}


def _profile_extent(ev: ProfileEvaluator) -> tuple[float, float]:
    p = ev.wave.profile
    return p.x0 - ev.offset, p.x_end - ev.offset


def supersolution_check(pair: FrontPair, params: PParams, t_grid=None, tol: float = 1e-3,
                        dz: float | None = None) -> SupersolutionReport:
    """Minimum of the supersolution residual over z and t in ``t_grid``.

    Outside the union of both profile windows u_bar is constant and the
    residual vanishes, so z only ranges over that union.
    """
    if t_grid is None:
        t_grid = np.arange(-20.0, 0.0 + 1e-9, 0.5)
    t_grid = np.asarray(t_grid, dtype=float)
    dz = pair.h if dz is None else dz
    lo1, hi1 = _profile_extent(pair.phi)
    lo2, hi2 = _profile_extent(pair.phi_hat)
    p_min = params.p(float(t_grid.min()))
    z_lo = min(lo1 - params.p0, lo2 + p_min)
    z_hi = max(hi1 - p_min, hi2 + params.p0)
    z = z_lo + dz * np.arange(int(np.ceil((z_hi - z_lo) / dz)) + 1)
    best = (math.inf, 0.0, 0.0)
    for t in t_grid:
        r = supersolution_residual(pair, params, z, float(t))
        i = int(np.argmin(r))
        if r[i] < best[0]:
            best = (float(r[i]), float(z[i]), float(t))
    ns = pair.n_star
    return SupersolutionReport(best[0], best[1], best[2], tol, best[0] >= -tol, params.N, ns)


# ----------------------------------------------------------------------------
# backward Cauchy sequence


def theta_shift(c: float, c_hat: float, omega: float, theta: float) -> tuple[float, float]:
    """(x0, t0) with u_theta(x, t) = u_omega(x + x0, t + t0)."""
    d = c - c_hat
    return (c + c_hat) * (omega - theta) / d, 2.0 * (theta - omega) / d


def merge_time(pair: FrontPair, theta: float) -> float:
    """Time at which the two fronts of the subsolution meet."""
    return -2.0 * theta / (pair.c - pair.c_hat)


def default_time_step(pair: FrontPair, courant: float = 0.04, base: float = 0.05) -> float:
    """Largest base/2^k with max(|c|, |c_hat|) * dt <= courant.

    The RK4 error of a translating front scales with (c dt)^4; this keeps it
    well under the 1e-8 monotonicity tolerance.
    """
    dt, speed = base, max(abs(pair.c), abs(pair.c_hat))
    while speed * dt > courant:
        dt *= 0.5
    return dt


def default_forward_horizon(pair: FrontPair, theta: float, relax: float = 40.0) -> float:
    return float(max(10.0, math.ceil(merge_time(pair, theta) + relax)))


def _far_margin(ev: ProfileEvaluator, toward_one: str, tol: float = 1e-13) -> float:
    """Distance from the level-1/2 crossing to where the front is within ``tol`` of 1."""
    p = ev.wave.profile
    gap = 1.0 - p.values
    mid = ev.crossing(0.5) + ev.offset
    if toward_one == "right":
        idx = np.nonzero(gap > tol)[0]
        edge = p.x[idx[-1]] if idx.size else p.x_end
        return float(edge - mid)
    idx = np.nonzero(gap > tol)[0]
    edge = p.x[idx[0]] if idx.size else p.x0
    return float(mid - edge)


def entire_window(pair: FrontPair, thetas, n_max: int, t_end: float) -> tuple[float, float]:
    """Grid window holding both fronts, with their approach to 1, over [-n_max, t_end]."""
    reach = 5.0 * kernel_radius(pair.wave.kernel)
    right = _far_margin(pair.phi, "right") + reach
    left = _far_margin(pair.phi_hat, "left") + reach
    xs_phi, xs_hat = [], []
    for th in thetas:
        for t in (-float(n_max), float(t_end)):
            xs_phi.append(pair.phi.crossing(0.5) - pair.c * t - th)
            xs_hat.append(pair.phi_hat.crossing(0.5) - pair.c_hat * t + th)
    lo = min(min(xs_hat), min(xs_phi)) - left
    hi = max(max(xs_phi), max(xs_hat)) + right
    h = pair.h
    return h * math.floor(lo / h), h * math.ceil(hi / h)


@dataclass
class EntireRun:
    pair: FrontPair
    params: PParams
    theta: float
    n_list: tuple[int, ...]
    t_forward: float
    window: tuple[float, float]
    dt: float
    checkpoint: float
    trajectories: dict[int, Trajectory] = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    @property
    def omega(self) -> float:
        return self.params.omega

    @property
    def shift(self) -> tuple[float, float]:
        return theta_shift(self.pair.c, self.pair.c_hat, self.params.omega, self.theta)

    @property
    def x(self) -> np.ndarray:
        return self.trajectories[self.n_list[0]].states[0].x

    def state(self, n: int, t: float) -> GridFunction:
        return self.trajectories[n].state_at(t, atol=1e-7)

    def rate(self, n: int, t: float) -> GridFunction:
        tr = self.trajectories[n]
        i = int(np.argmin(np.abs(tr.times - t)))
        if abs(tr.times[i] - t) > 1e-7:
            raise KeyError(t)
        return tr.rates[i]

    def shared_times(self, n_a: int, n_b: int) -> np.ndarray:
        lo = -min(n_a, n_b)
        ta = self.trajectories[n_a].times
        return ta[ta >= lo - 1e-9]


def _initial_data(pair: FrontPair, theta: float, n: int, window, h) -> GridFunction:
    return GridFunction.on_window(
        window[0], window[1], h,
        lambda x: np.clip(subsolution(pair, theta, x, -float(n)), 0.0, 1.0), 1.0, 1.0)


def build_entire(pair: FrontPair, params: PParams, theta: float | None = None,
                 n_list=(5, 10, 20), t_forward: float | None = None, *, dt: float | None = None,
                 checkpoint: float = 0.5, window=None, jobs: int = 1, strict: bool = False) -> EntireRun:
    """Solve the Cauchy problems started from the subsolution at t = -n and diagnose them.

    ``theta`` defaults to omega; other values move the fronts' phases in the
    initial data, which equals translating the omega solution by theta_shift.
    """
    n_list = tuple(sorted(int(n) for n in n_list))
    if not n_list or n_list[0] < 1:
        raise ValidationError("n_list must hold positive integers")
    theta = params.omega if theta is None else float(theta)
    if t_forward is None:
        t_forward = default_forward_horizon(pair, theta)
    if dt is None:
        dt = default_time_step(pair)
    if dt > stability_budget(pair.nl):
        raise ValidationError("dt exceeds the stability budget")
    steps = checkpoint / dt
    if abs(steps - round(steps)) > 1e-9:
        raise ValidationError("checkpoint spacing must be a multiple of dt")
    if window is None:
        window = entire_window(pair, [theta], n_list[-1], t_forward)
    kern = pair.wave.kernel

    def solve(n):
        u0 = _initial_data(pair, theta, n, window, pair.h)
        return integrate(kern, pair.nl, u0, t_forward + n, dt, record_every=checkpoint, t0=-float(n))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trajs = list(pool.map(solve, n_list))
    else:
        trajs = [solve(n) for n in n_list]
    run = EntireRun(pair, params, theta, n_list, float(t_forward), tuple(window), dt, checkpoint,
                    dict(zip(n_list, trajs)))
    run.diagnostics = diagnose(run)
    if strict and run.diagnostics["sandwich_lower"]["min"] < -SANDWICH_TOL:
        d = run.diagnostics["sandwich_lower"]
        raise ConstructionError(
            f"u_n fell below the subsolution by {-d['min']:.3e} at x={d['x']:.3f}, t={d['t']:.2f}",
            **d)
    return run


def diagnose(run: EntireRun) -> dict:
    pair, params = run.pair, run.params
    x = run.x
    x0s, t0s = run.shift
    low = {"min": math.inf, "x": 0.0, "t": 0.0, "n": 0, "tol": SANDWICH_TOL}
    up = {"max": -math.inf, "tol": UPPER_TOL}
    sup = {"min": math.inf, "x": 0.0, "t": 0.0, "n": 0, "tol": SANDWICH_TOL}
    for n, tr in run.trajectories.items():
        for t, s in zip(tr.times, tr.states):
            gap = s.values - subsolution(pair, run.theta, x, t)
            i = int(np.argmin(gap))
            if gap[i] < low["min"]:
                low.update(min=float(gap[i]), x=float(x[i]), t=float(t), n=n)
            up["max"] = max(up["max"], float(s.values.max()) - 1.0)
            if t + t0s <= 1e-12:
                sgap = supersolution(pair, params, x + x0s, t + t0s) - s.values
                j = int(np.argmin(sgap))
                if sgap[j] < sup["min"]:
                    sup.update(min=float(sgap[j]), x=float(x[j]), t=float(t), n=n)
    low["passed"] = low["min"] >= -SANDWICH_TOL
    up["passed"] = up["max"] <= UPPER_TOL
    sup["passed"] = sup["min"] >= -SANDWICH_TOL

    mono, succ = [], []
    comp = (np.abs(x) <= 20.0)
    for na, nb in zip(run.n_list, run.n_list[1:]):
        worst, diff = math.inf, 0.0
        for t in run.shared_times(na, nb):
            ua, ub = run.state(na, t).values, run.state(nb, t).values
            worst = min(worst, float(np.min(ub - ua)))
            if -run.n_list[0] <= t <= 0.0:
                diff = max(diff, float(np.max(np.abs(ub - ua)[comp])))
        mono.append({"n": [na, nb], "min_gap": worst, "tol": MONOTONE_TOL,
                     "passed": worst >= -MONOTONE_TOL})
        succ.append({"n": [na, nb], "sup_diff": diff})
    succ_decreasing = all(a["sup_diff"] > b["sup_diff"] for a, b in zip(succ, succ[1:]))

    n_max = run.n_list[-1]
    tr = run.trajectories[n_max]
    ut_min = min(float(r.values.min()) for r in tr.rates)
    eta = 2 * pair.h
    c1, c2 = regularity_probe(tr, eta)
    return {
        "theta": run.theta, "omega": run.omega, "shift": {"x0": x0s, "t0": t0s},
        "window": list(run.window), "dt": run.dt, "t_forward": run.t_forward,
        "sandwich_lower": low, "upper_bound": up, "below_supersolution": sup,
        "monotone_in_n": mono,
        "successive_differences": {"pairs": succ, "compact_window": [-20.0, 20.0],
                                   "time_range": [-float(run.n_list[0]), 0.0],
                                   "decreasing": succ_decreasing},
        "ut_min": {"value": ut_min, "n": n_max},
        "lipschitz": {"eta": eta, "C1": c1, "C2": c2},
    }


# ----------------------------------------------------------------------------
# behaviour as t -> -inf and qualitative checks


def limit_match(run: EntireRun, T: float) -> float:
    """D(T): distance to phi_hat left of x = cbar T plus distance to phi right of it, at t = -T.

    Uses the largest n whose run reaches back to -T.
    """
    ns = [n for n in run.n_list if n >= T - 1e-9]
    if not ns or T <= 0:
        raise ValidationError(f"no run reaches t = -{T}")
    pair = run.pair
    u = run.state(ns[-1], -T).values
    x = run.x
    split = 0.5 * (pair.c + pair.c_hat) * T
    left = x <= split
    right = x >= split
    d_left = np.abs(u[left] - pair.phi_hat(x[left] - pair.c_hat * T - run.theta))
    d_right = np.abs(u[right] - pair.phi(x[right] - pair.c * T + run.theta))
    return float((d_left.max() if d_left.size else 0.0) + (d_right.max() if d_right.size else 0.0))


def limit_table(run: EntireRun, Ts=(5.0, 10.0, 20.0)) -> dict:
    Ds = [limit_match(run, T) for T in Ts]
    fit = stats.linregress(np.asarray(Ts, dtype=float), np.log(np.maximum(Ds, 1e-300)))
    c0s = run.params.c0 * run.params.sigma
    return {
        "T": list(map(float, Ts)), "D": Ds,
        "strictly_decreasing": all(a > b for a, b in zip(Ds, Ds[1:])),
        "decay_rate": float(-fit.slope), "rate_floor": 0.5 * c0s,
        "rate_ok": float(-fit.slope) >= 0.5 * c0s,
    }


class Case(str, Enum):
    A = "a"
    B = "b"
    C = "c"


_CASE_OF = {SpeedClass.BOTH_POSITIVE: Case.A, SpeedClass.BOTH_NEGATIVE: Case.B,
            SpeedClass.C_POS_CHAT_NEG: Case.C}


def case_of(pair: FrontPair) -> Case:
    return _CASE_OF[classify_speeds(pair.c, pair.c_hat)]


def theta_monotonicity(run_lo: EntireRun, run_hi: EntireRun) -> float:
    """min over shared (n, t, x) of u(theta_hi) - u(theta_lo)."""
    if run_lo.theta > run_hi.theta:
        run_lo, run_hi = run_hi, run_lo
    if run_lo.window != run_hi.window:
        raise ValidationError("theta runs must share a window")
    worst = math.inf
    for n in set(run_lo.n_list) & set(run_hi.n_list):
        a, b = run_lo.trajectories[n], run_hi.trajectories[n]
        for t, s in zip(a.times, a.states):
            try:
                other = b.state_at(t, atol=1e-7)
            except KeyError:
                continue
            worst = min(worst, float(np.min(other.values - s.values)))
    return worst


def qualitative_checks(run: EntireRun, case: Case | str, eps: float = 1e-2,
                       theta_partner: EntireRun | None = None) -> dict:
    """Finite-range proxies of the long-time behaviour for each speed-sign case."""
    case = Case(case)
    found = case_of(run.pair)
    if found != case:
        raise ValidationError(f"requested case ({case.value}) but the speeds give case ({found.value})")
    n = run.n_list[-1]
    tr = run.trajectories[n]
    x = run.x
    margin = 5.0 * kernel_radius(run.pair.wave.kernel)
    final = tr.final.values
    out: dict = {"case": case.value, "eps": eps, "n": n, "t_end": float(tr.times[-1])}
    if case == Case.C:
        ut = min(float(r.values.min()) for tr_ in run.trajectories.values() for r in tr_.rates)
        out["ut_min"] = {"value": ut, "tol": MONOTONE_TOL, "passed": ut >= -MONOTONE_TOL}
        dev = float(np.max(np.abs(final - 1.0)))
        out["final_sup_deviation"] = {"value": dev, "tol": eps, "passed": dev <= eps}
    else:
        if case == Case.A:
            X = x[-1] - margin
            region = x >= x[0] + margin
        else:
            X = x[0] + margin
            region = x <= x[-1] - margin
        iX = int(np.argmin(np.abs(x - X)))
        edge_min = min(float(s.values[iX]) for s in tr.states)
        out["edge_value_min"] = {"x": float(x[iX]), "value": edge_min, "tol": eps,
                                 "passed": edge_min >= 1.0 - eps}
        fmin = float(final[region].min())
        out["final_region_min"] = {"range": [float(x[region][0]), float(x[region][-1])],
                                   "value": fmin, "tol": eps, "passed": fmin >= 1.0 - eps}
    if theta_partner is not None:
        gap = theta_monotonicity(run, theta_partner)
        out["theta_monotone"] = {"thetas": sorted([run.theta, theta_partner.theta]),
                                 "min_gap": gap, "tol": MONOTONE_TOL, "passed": gap >= -MONOTONE_TOL}
    out["passed"] = all(v["passed"] for v in out.values() if isinstance(v, dict) and "passed" in v)
    return out
