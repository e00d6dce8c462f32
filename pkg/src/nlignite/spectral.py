"""Characteristic functions of the linearised front equations, their real roots,
and exponential-tail diagnostics of computed fronts.

    F1(mu)     = M(mu) - 1 - c mu                 M(mu) = int J(y) exp(-mu y) dy
    F2(mu)     = F1(mu) + f'(1)
    F1hat(mu)  = M(-mu) - 1 + c_hat mu
    F2hat(mu)  = F1hat(mu) + f'(1)

Near 0 the increasing front behaves like exp(mu1 xi); near 1 it approaches as
1 - A exp(mu21 xi).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np
from scipy import optimize, stats

from .errors import DivergenceError, InsufficientDataError, RootNotFoundError, ValidationError
from .field import GridFunction, derivative
from .kernel import KernelSpec, kernel_mgf, kernel_mgf_derivative, kernel_moment
from .waves import Orientation, WaveSolution

log = logging.getLogger(__name__)

DEFAULT_BAND = (1e-8, 1e-3)
_SCAN = 500


class Which(str, Enum):
    F1 = "F1"
    F2 = "F2"
    F1HAT = "F1hat"
    F2HAT = "F2hat"


def _window(kernel: KernelSpec, which: Which) -> tuple[float, float]:
    lo, hi = kernel.mgf_window
    if which in (Which.F1HAT, Which.F2HAT):
        return -hi, -lo
    return lo, hi


def characteristic_eval(which: Which | str, mu: float, kernel: KernelSpec, speed: float,
                        fprime_at_1: float = 0.0, tol: float = 1e-12) -> float:
    """Evaluate one of F1, F2, F1hat, F2hat; ``speed`` is c or c_hat accordingly."""
    which = Which(which)
    if which in (Which.F1, Which.F2):
        val = kernel_mgf(kernel, mu, tol) - 1.0 - speed * mu
    else:
        val = kernel_mgf(kernel, -mu, tol) - 1.0 + speed * mu
    if which in (Which.F2, Which.F2HAT):
        val += fprime_at_1
    return val


def characteristic_derivative(which: Which | str, mu: float, kernel: KernelSpec, speed: float,
                              order: int = 1, tol: float = 1e-12) -> float:
    which = Which(which)
    if which in (Which.F1, Which.F2):
        d = kernel_mgf_derivative(kernel, mu, order, tol)
        return d - speed if order == 1 else d
    d = (-1) ** order * kernel_mgf_derivative(kernel, -mu, order, tol)
    return d + speed if order == 1 else d


@dataclass(frozen=True)
class CharacteristicRoots:
    mu1: float
    mu21: float
    mu22: float
    mu1_hat: float
    mu21_hat: float
    mu22_hat: float
    analyticity_window: tuple[float, float]

    @property
    def sigma(self) -> float:
        return min(self.mu1, self.mu1_hat)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["analyticity_window"] = list(self.analyticity_window)
        return d


def _scan_points(a: float, b: float, n: int = _SCAN) -> np.ndarray:
    """Points in the open interval (a, b), log-clustered towards both ends."""
    width = b - a
    g = np.geomspace(1e-10, 1.0, n, endpoint=False)
    pts = np.concatenate([a + width * g * 0.5, b - width * g * 0.5])
    return np.unique(pts)


def _finite_bound(fn, sign: float, start: float = 1.0) -> float:
    """For an infinite window, march out until fn is positive."""
    b = start
    for _ in range(60):
        if fn(sign * b) > 0:
            return sign * b * 1.05
        b *= 2.0
    raise RootNotFoundError("characteristic function stays negative on a huge interval")


def _root_on_side(fn, dfn, a: float, b: float, label: str, tol: float) -> float:
    """First sign change of fn moving away from 0 inside (a, b) with 0 at an end."""
    pts = _scan_points(a, b)
    toward = pts if a == 0.0 else pts[::-1]
    vals = np.array([fn(p) for p in toward])
    pos = np.nonzero(vals > 0)[0]
    if pos.size == 0:
        raise RootNotFoundError(
            f"{label}: no sign change inside the analyticity window ({a:g}, {b:g})", window=(a, b))
    k = pos[0]
    if k == 0:
        raise RootNotFoundError(f"{label}: positive next to 0, F'(0) has the wrong sign")
    x0, x1 = toward[k - 1], toward[k]
    r = optimize.brentq(fn, min(x0, x1), max(x0, x1), xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    for _ in range(3):
        d = dfn(r)
        if d == 0:
            break
        nr = r - fn(r) / d
        if not (min(x0, x1) <= nr <= max(x0, x1)):
            break
        if abs(fn(nr)) >= abs(fn(r)):
            break
        r = nr
    if abs(fn(r)) > tol:
        raise RootNotFoundError(f"{label}: root residual {fn(r):.3e} above {tol:g}")
    return float(r)


def find_roots(kernel: KernelSpec, c: float, c_hat: float, fprime_at_1: float,
               tol: float = 1e-10) -> CharacteristicRoots:
    """mu1 > 0 (F1), mu21 < 0 < mu22 (F2), and the hatted counterparts."""
    out = {}
    for which, spd, names in (
        (Which.F1, c, ("mu1",)),
        (Which.F2, c, ("mu21", "mu22")),
        (Which.F1HAT, c_hat, ("mu1_hat",)),
        (Which.F2HAT, c_hat, ("mu21_hat", "mu22_hat")),
    ):
        fp1 = fprime_at_1 if which in (Which.F2, Which.F2HAT) else 0.0
        fn = lambda m, w=which, s=spd, f1=fp1: characteristic_eval(w, m, kernel, s, f1)
        dfn = lambda m, w=which, s=spd: characteristic_derivative(w, m, kernel, s)
        lo, hi = _window(kernel, which)
        if which in (Which.F1, Which.F1HAT):
            if characteristic_derivative(which, 0.0, kernel, spd) >= 0:
                raise RootNotFoundError(f"{which.value}'(0) >= 0: no positive root")
            b = hi if math.isfinite(hi) else _finite_bound(fn, 1.0)
            out[names[0]] = _root_on_side(fn, dfn, 0.0, b, which.value, tol)
        else:
            a = lo if math.isfinite(lo) else _finite_bound(fn, -1.0)
            b = hi if math.isfinite(hi) else _finite_bound(fn, 1.0)
            out[names[0]] = _root_on_side(fn, dfn, a, 0.0, which.value + " (negative)", tol)
            out[names[1]] = _root_on_side(fn, dfn, 0.0, b, which.value + " (positive)", tol)
    return CharacteristicRoots(analyticity_window=kernel.mgf_window, **out)


def sign_pattern(which: Which | str, kernel: KernelSpec, speed: float, fprime_at_1: float,
                 roots: tuple[float, ...], n: int = 1000) -> bool:
    """Check the sign pattern between and beyond the given roots on n samples.

    F1-type: negative on (0, mu1), positive beyond mu1 (inside the window).
    F2-type: positive below mu21, negative between, positive above mu22.
    """
    which = Which(which)
    lo, hi = _window(kernel, which)
    ok = True
    f1 = fprime_at_1 if which in (Which.F2, Which.F2HAT) else 0.0
    ev = lambda m: characteristic_eval(which, m, kernel, speed, f1)
    if which in (Which.F1, Which.F1HAT):
        (r,) = roots
        top = hi if math.isfinite(hi) else 4 * r
        for m in np.linspace(0, top, n + 2)[1:-1]:
            v = ev(m)
            if abs(m - r) < 1e-9 * max(1.0, r):
                continue
            ok &= (v < 0) if m < r else (v > 0)
    else:
        r1, r2 = roots
        bot = lo if math.isfinite(lo) else 4 * r1
        top = hi if math.isfinite(hi) else 4 * r2
        for m in np.linspace(bot, top, n + 2)[1:-1]:
            if min(abs(m - r1), abs(m - r2)) < 1e-9:
                continue
            v = ev(m)
            ok &= (v < 0) if r1 < m < r2 else (v > 0)
    return bool(ok)


# ----------------------------------------------------------------------------
# tails


@dataclass(frozen=True)
class TailFit:
    rate: float
    r2: float
    prefactor: float
    npoints: int

    def to_dict(self) -> dict:
        return asdict(self)


def _tail_quantity(profile: GridFunction, side: str) -> np.ndarray:
    ff = profile.farfield_left if side == "left" else profile.farfield_right
    if abs(ff) < 0.5:
        return profile.values - ff
    return ff - profile.values


def _band_mask(q: np.ndarray, x: np.ndarray, side: str, band) -> np.ndarray:
    lo, hi = band
    inside = (q > lo) & (q < hi)
    # keep only the stretch that is connected to the chosen far field
    idx = np.nonzero(inside)[0]
    if idx.size == 0:
        return inside
    mask = np.zeros_like(inside)
    if side == "left":
        end = idx[0]
        while end < q.size and inside[end]:
            end += 1
        mask[idx[0]:end] = True
    else:
        start = idx[-1]
        while start >= 0 and inside[start]:
            start -= 1
        mask[start + 1:idx[-1] + 1] = True
    return mask


def tail_rate_fit(profile: GridFunction, side: str, band=DEFAULT_BAND, min_points: int = 30) -> TailFit:
    """Least-squares slope of log(distance to the far field) against x inside the band."""
    if side not in ("left", "right"):
        raise ValidationError("side must be 'left' or 'right'")
    q = _tail_quantity(profile, side)
    x = profile.x
    mask = _band_mask(q, x, side, band)
    if mask.sum() < min_points:
        raise InsufficientDataError(
            f"only {int(mask.sum())} grid points have tail values in {band}; need {min_points}")
    fit = stats.linregress(x[mask], np.log(q[mask]))
    return TailFit(float(fit.slope), float(fit.rvalue**2), float(np.exp(fit.intercept)), int(mask.sum()))


class RatioBranch(str, Enum):
    ZERO = "zero"
    MU1 = "mu1"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class RatioDiagnostic:
    limit_est: float
    branch: RatioBranch
    small_support_estimate: float | None
    npoints: int

    def to_dict(self) -> dict:
        return {"limit_est": self.limit_est, "branch": self.branch.value,
                "small_support_estimate": self.small_support_estimate, "npoints": self.npoints}


class ZeroBranchWarning(UserWarning):
    pass


def ratio_diagnostic(wave: WaveSolution, mu1: float, kernel: KernelSpec | None = None,
                     band=DEFAULT_BAND, min_points: int = 10) -> RatioDiagnostic:
    """Deep-tail average of phi'/phi on the side where the front tends to 0.

    For the increasing front the ratio is compared with mu1; for the decreasing
    front phi_hat'/phi_hat is compared with -mu1_hat (pass mu1_hat as ``mu1``).
    """
    p = wave.profile
    side = "left" if wave.orientation == Orientation.INCREASING else "right"
    q = _tail_quantity(p, side)
    mask = _band_mask(q, p.x, side, band)
    if mask.sum() < min_points:
        raise InsufficientDataError(f"tail band {band} holds only {int(mask.sum())} points")
    d = derivative(p, wave.fd_order).values
    ratio = d[mask] / p.values[mask]
    est = float(np.mean(ratio))
    mag = abs(est)
    if abs(mag - mu1) <= 0.1 * mu1:
        branch = RatioBranch.MU1
    elif mag < 0.1 * mu1:
        branch = RatioBranch.ZERO
    else:
        branch = RatioBranch.INDETERMINATE
    if branch == RatioBranch.ZERO:
        warnings.warn("phi'/phi tends to 0 in the tail: condition k*phi <= phi' fails and the "
                      "entire-solution construction will refuse", ZeroBranchWarning, stacklevel=2)
    small = None
    if kernel is not None:
        m1, m2 = kernel_moment(kernel, 1), kernel_moment(kernel, 2)
        # the decreasing front is the increasing one of the reflected kernel
        sign = 1.0 if wave.orientation == Orientation.INCREASING else -1.0
        small = sign * 2.0 * (wave.speed + m1) / m2
    return RatioDiagnostic(est, branch, small, int(mask.sum()))
