"""Dispersal kernels: closed-form piecewise densities, their integrals, and grid sampling.

A kernel is a list of pieces, each an analytic density on an interval. Exponential
tails are integrated in closed form; bounded pieces go through adaptive quadrature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial as _Poly
from scipy import integrate

from .errors import DivergenceError, ValidationError

INF = math.inf


@dataclass(frozen=True)
class ExpTail:
    """a * exp(b * (x - x0)) on [lo, hi]; one end may be infinite."""

    lo: float
    hi: float
    a: float
    b: float
    x0: float

    kind = "exp"

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.a * np.exp(self.b * (x - self.x0))

    def mgf_bounds(self) -> tuple[float, float]:
        # window of mu for which  int x^k exp(-mu x) piece  converges
        if self.hi == INF and self.lo == -INF:
            raise ValidationError("exponential piece cannot cover the whole line")
        if self.hi == INF:
            return (self.b, INF)
        if self.lo == -INF:
            return (-INF, self.b)
        return (-INF, INF)

    def integral(self, k: int, mu: float, tol: float) -> tuple[float, float]:
        lo_mu, hi_mu = self.mgf_bounds()
        if not (lo_mu < mu < hi_mu):
            raise DivergenceError(
                f"exponential tail with rate {self.b} diverges at mu={mu}",
                window=(lo_mu, hi_mu),
            )
        beta = self.b - mu
        if self.hi == INF:
            # int_lo^inf x^k e^{beta x} dx, beta < 0
            edge = self.lo
            sgn = 1.0
            base = -beta
        elif self.lo == -INF:
            edge = self.hi
            sgn = -1.0
            base = beta
        else:
            return _quad(lambda x: x**k * math.exp(-mu * x) * self.a * math.exp(self.b * (x - self.x0)),
                         self.lo, self.hi, tol)
        total = 0.0
        for m in range(k + 1):
            total += math.comb(k, m) * edge ** (k - m) * sgn**m * math.factorial(m) / base ** (m + 1)
        scale = self.a * math.exp(self.b * (edge - self.x0) - mu * edge)
        return scale * total, 0.0

    def reflected(self) -> "ExpTail":
        return ExpTail(-self.hi, -self.lo, self.a, -self.b, -self.x0)

    def shifted(self, s: float) -> "ExpTail":
        return ExpTail(self.lo + s, self.hi + s, self.a, self.b, self.x0 + s)

    def to_dict(self) -> dict:
        return {"kind": "exp", "interval": [self.lo, self.hi], "a": self.a, "b": self.b, "x0": self.x0}


@dataclass(frozen=True)
class PolyPiece:
    """sum_k coeffs[k] * x**k on a bounded [lo, hi]."""

    lo: float
    hi: float
    coeffs: tuple[float, ...]

    kind = "poly"

    def value(self, x: np.ndarray) -> np.ndarray:
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def mgf_bounds(self) -> tuple[float, float]:
        return (-INF, INF)

    def integral(self, k: int, mu: float, tol: float) -> tuple[float, float]:
        c = self.coeffs
        return _quad(
            lambda x: x**k * math.exp(-mu * x) * np.polynomial.polynomial.polyval(x, c),
            self.lo, self.hi, tol,
        )

    def reflected(self) -> "PolyPiece":
        c = tuple(ck * (-1) ** k for k, ck in enumerate(self.coeffs))
        return PolyPiece(-self.hi, -self.lo, c)

    def shifted(self, s: float) -> "PolyPiece":
        p = _Poly(self.coeffs)(_Poly([-s, 1.0]))
        return PolyPiece(self.lo + s, self.hi + s, tuple(float(v) for v in p.coef))

    def to_dict(self) -> dict:
        return {"kind": "poly", "interval": [self.lo, self.hi], "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class GaussianPiece:
    weight: float
    mean: float
    std: float
    lo: float = -INF
    hi: float = INF

    kind = "gaussian"

    def value(self, x: np.ndarray) -> np.ndarray:
        z = (x - self.mean) / self.std
        return self.weight * np.exp(-0.5 * z * z) / (self.std * math.sqrt(2 * math.pi))

    def mgf_bounds(self) -> tuple[float, float]:
        return (-INF, INF)

    def integral(self, k: int, mu: float, tol: float) -> tuple[float, float]:
        # one exponent, so exp(-mu x) cannot overflow far out where the Gaussian underflows;
        # split at the mean of the tilted Gaussian so quad sees the bulk on each half-line
        lo, hi = self.lo, self.hi
        norm = self.weight / (self.std * math.sqrt(2 * math.pi))
        g = lambda x: x**k * norm * math.exp(-mu * x - 0.5 * ((x - self.mean) / self.std) ** 2)
        mid = min(max(self.mean - mu * self.std**2, lo), hi)
        v1, e1 = _quad(g, lo, mid, tol)
        v2, e2 = _quad(g, mid, hi, tol)
        return v1 + v2, e1 + e2

    def reflected(self) -> "GaussianPiece":
        return GaussianPiece(self.weight, -self.mean, self.std, -self.hi, -self.lo)

    def shifted(self, s: float) -> "GaussianPiece":
        return GaussianPiece(self.weight, self.mean + s, self.std, self.lo + s, self.hi + s)

    def to_dict(self) -> dict:
        return {"kind": "gaussian", "interval": [self.lo, self.hi], "weight": self.weight,
                "mean": self.mean, "std": self.std}


@dataclass(frozen=True)
class TopHat:
    lo: float
    hi: float
    height: float

    kind = "tophat"

    def value(self, x: np.ndarray) -> np.ndarray:
        # half height on the jump so grid sampling behaves like the trapezoid rule
        inside = (x > self.lo) & (x < self.hi)
        edge = (x == self.lo) | (x == self.hi)
        return np.where(inside, self.height, np.where(edge, 0.5 * self.height, 0.0))

    def mgf_bounds(self) -> tuple[float, float]:
        return (-INF, INF)

    def integral(self, k: int, mu: float, tol: float) -> tuple[float, float]:
        return _quad(lambda x: self.height * x**k * math.exp(-mu * x), self.lo, self.hi, tol)

    def reflected(self) -> "TopHat":
        return TopHat(-self.hi, -self.lo, self.height)

    def shifted(self, s: float) -> "TopHat":
        return TopHat(self.lo + s, self.hi + s, self.height)

    def to_dict(self) -> dict:
        return {"kind": "tophat", "interval": [self.lo, self.hi], "height": self.height}


Piece = ExpTail | PolyPiece | GaussianPiece | TopHat


def _quad(fn, lo: float, hi: float, tol: float) -> tuple[float, float]:
    if lo == hi:
        return 0.0, 0.0
    eps = max(tol * 1e-2, 1e-13)
    with warnings.catch_warnings():
        # roundoff notices at the requested accuracy are expected; err carries the estimate
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(fn, lo, hi, epsabs=eps, epsrel=eps, limit=400)
    if not math.isfinite(val):
        raise DivergenceError(f"quadrature diverged on [{lo}, {hi}]")
    return val, err


@dataclass(frozen=True)
class KernelSpec:
    """Piecewise closed-form dispersal density.

    Pieces are tried in order; the first whose closed interval contains x
    supplies J(x). ``support_hint`` bounds the region used for sampling,
    witness search and total-variation estimates.
    """

    name: str
    pieces: tuple[Piece, ...]
    support_hint: tuple[float, float]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        done = np.zeros(x.shape, dtype=bool)
        for p in self.pieces:
            m = (~done) & (x >= p.lo) & (x <= p.hi)
            if m.any():
                out[m] = p.value(x[m])
                done |= m
        return out

    @property
    def mgf_window(self) -> tuple[float, float]:
        """Open interval of mu on which  int J(y) exp(-mu y) dy  is finite."""
        lo, hi = -INF, INF
        for p in self.pieces:
            a, b = p.mgf_bounds()
            lo, hi = max(lo, a), min(hi, b)
        return lo, hi

    @property
    def lambda_window(self) -> tuple[float, float]:
        """Open interval of lambda > 0 with  int J(x) exp(lambda |x|) dx < inf."""
        lo, hi = self.mgf_window
        return 0.0, min(-lo, hi)

    def to_dict(self) -> dict:
        return {"name": self.name, "pieces": [p.to_dict() for p in self.pieces],
                "support_hint": list(self.support_hint)}


@dataclass(frozen=True)
class KernelReport:
    mass: float
    m1: float
    m2: float
    lambda_window: tuple[float, float]
    j2_witnesses: tuple[float, float]
    lipschitz_K1: float

    def to_dict(self) -> dict:
        return {
            "mass": self.mass,
            "m1": self.m1,
            "m2": self.m2,
            "lambda_window": list(self.lambda_window),
            "j2_witnesses": list(self.j2_witnesses),
            "lipschitz_K1": self.lipschitz_K1,
        }


def _weighted_integral(spec: KernelSpec, k: int, mu: float, tol: float) -> tuple[float, float]:
    lo, hi = spec.mgf_window
    if not (lo < mu < hi):
        raise DivergenceError(
            f"int J(y) y^{k} exp(-mu y) dy diverges at mu={mu}; window is ({lo}, {hi})",
            window=(lo, hi),
        )
    total, err = 0.0, 0.0
    for p in spec.pieces:
        v, e = p.integral(k, mu, tol)
        total += v
        err += e
    return total, err


def _check_nonnegative(spec: KernelSpec, n: int = 4001) -> None:
    xs = np.linspace(*spec.support_hint, n)
    vals = spec(xs)
    if np.any(vals < 0):
        bad = float(xs[np.argmin(vals)])
        raise ValidationError(f"kernel {spec.name!r} is negative at x={bad}", x=bad)


def kernel_mass(spec: KernelSpec, tol: float = 1e-10) -> float:
    if tol <= 0:
        raise ValueError("tol must be positive")
    _check_nonnegative(spec)
    return kernel_mgf(spec, 0.0, tol)


def kernel_moment(spec: KernelSpec, k: int, tol: float = 1e-10) -> float:
    """int J(y) y^k dy for k in {0, 1, 2}."""
    if k not in (0, 1, 2):
        raise ValueError("only moments k = 0, 1, 2 are supported")
    return _weighted_integral(spec, k, 0.0, tol)[0]


def kernel_mgf(spec: KernelSpec, mu: float, tol: float = 1e-10) -> float:
    """int J(y) exp(-mu y) dy."""
    return _weighted_integral(spec, 0, mu, tol)[0]


def kernel_mgf_derivative(spec: KernelSpec, mu: float, order: int = 1, tol: float = 1e-10) -> float:
    """d^order/dmu^order of kernel_mgf, i.e. int J(y) (-y)^order exp(-mu y) dy."""
    return (-1) ** order * _weighted_integral(spec, order, mu, tol)[0]


def kernel_reflect(spec: KernelSpec) -> KernelSpec:
    """Kernel of y -> J(-y)."""
    pieces = tuple(p.reflected() for p in spec.pieces)
    lo, hi = spec.support_hint
    name = spec.name[:-len(":reflected")] if spec.name.endswith(":reflected") else spec.name + ":reflected"
    return KernelSpec(name, pieces, (-hi, -lo))


def kernel_shift(spec: KernelSpec, s: float) -> KernelSpec:
    """Kernel of y -> J(y - s); adds s to the first moment."""
    pieces = tuple(p.shifted(s) for p in spec.pieces)
    lo, hi = spec.support_hint
    return KernelSpec(f"{spec.name}:shift={s:g}", pieces, (lo + s, hi + s))


def total_variation_quotient(spec: KernelSpec, eta: float, n: int = 200_001) -> float:
    """(1/eta) * int |J(x + eta) - J(x)| dx by the trapezoid rule on the support hint."""
    lo, hi = spec.support_hint
    xs = np.linspace(lo - eta, hi, n)
    diff = np.abs(spec(xs + eta) - spec(xs))
    return float(integrate.trapezoid(diff, xs)) / eta


def estimate_K1(spec: KernelSpec, etas: Sequence[float] | None = None) -> float:
    if etas is None:
        etas = np.geomspace(1.0, 1e-3, 13)
    return max(total_variation_quotient(spec, float(e)) for e in etas)


def find_j2_witnesses(spec: KernelSpec, n: int = 10_000) -> tuple[float, float]:
    """Points a <= 0 <= b, a != b, with J(a) > 0 and J(b) > 0, taken as the
    largest sampled values on each side of the origin."""
    lo, hi = spec.support_hint
    ends = [e for p in spec.pieces for e in (p.lo, p.hi) if math.isfinite(e) and lo <= e <= hi]
    xs = np.union1d(np.linspace(lo, hi, n), [0.0, *ends])
    vals = spec(xs)
    neg, pos = xs <= 0, xs >= 0
    if not (np.any(vals[neg] > 0) and np.any(vals[pos] > 0)):
        raise ValidationError(f"kernel {spec.name!r} violates (J2): no mass on one side of 0")
    a = float(xs[neg][np.argmax(vals[neg])])
    b = float(xs[pos][np.argmax(vals[pos])])
    if a == b:
        # both maxima sit at 0; any other positive sample on either side works
        cand = xs[(vals > 0) & (xs != 0.0)]
        if cand.size == 0:
            raise ValidationError(f"kernel {spec.name!r} violates (J2): only J(0) > 0")
        other = float(cand[np.argmin(np.abs(cand))])
        a, b = (other, 0.0) if other < 0 else (0.0, other)
    return a, b


def kernel_check(spec: KernelSpec, tol: float = 1e-8) -> KernelReport:
    if tol <= 0:
        raise ValueError("tol must be positive")
    mass = kernel_mass(spec, tol)
    if abs(mass - 1.0) > tol:
        raise ValidationError(f"kernel mass {mass!r} differs from 1 by more than {tol:g}", mass=mass)
    witnesses = find_j2_witnesses(spec)
    return KernelReport(
        mass=mass,
        m1=kernel_moment(spec, 1, tol),
        m2=kernel_moment(spec, 2, tol),
        lambda_window=spec.lambda_window,
        j2_witnesses=witnesses,
        lipschitz_K1=estimate_K1(spec),
    )


# ----------------------------------------------------------------------------
# grid sampling


@dataclass(frozen=True)
class SampledKernel:
    """Weights w_j of the discrete convolution  (J*u)_i = sum_j w_j u_{i-j}.

    Offsets run j = j_min .. j_min + len(weights) - 1; node offset y_j = j*h.
    """

    h: float
    j_min: int
    weights: np.ndarray = field(repr=False)
    name: str = ""

    @property
    def j_max(self) -> int:
        return self.j_min + len(self.weights) - 1

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(self.j_min, self.j_max + 1) * self.h

    @property
    def reach_left(self) -> int:
        """Number of nodes to the right of x that feed (J*u)(x) (from y < 0)."""
        return max(0, -self.j_min)

    @property
    def reach_right(self) -> int:
        return max(0, self.j_max)

    def moment(self, k: int) -> float:
        return float(np.sum(self.weights * self.offsets**k))

    def reversed(self) -> "SampledKernel":
        return SampledKernel(self.h, -self.j_max, self.weights[::-1].copy(), self.name + ":reflected")


def sample_kernel(spec: KernelSpec, h: float, rel_cutoff: float = 1e-14) -> SampledKernel:
    """Sample J on the lattice h*Z over the support hint, drop the ends where
    J < rel_cutoff * max J, and renormalise to unit discrete mass."""
    if h <= 0:
        raise ValueError("h must be positive")
    lo, hi = spec.support_hint
    j0, j1 = math.floor(lo / h), math.ceil(hi / h)
    js = np.arange(j0, j1 + 1)
    vals = spec(js * h)
    if np.any(vals < 0):
        raise ValidationError(f"kernel {spec.name!r} has negative samples")
    keep = np.nonzero(vals >= rel_cutoff * vals.max())[0]
    first, last = keep[0], keep[-1]
    vals = vals[first:last + 1]
    weights = vals / vals.sum()
    return SampledKernel(h, int(js[first]), weights, spec.name)


# ----------------------------------------------------------------------------
# presets and config


def example_2_1() -> KernelSpec:
    """Asymmetric kernel with zero first moment and tails e^{-(x-2)}, e^{2(x+1)}."""
    return KernelSpec(
        "paper-example-2.1",
        (
            ExpTail(-INF, -1.0, 8 / 15, 2.0, -1.0),
            PolyPiece(-1.0, 2.0, (2 / 9, -2 / 9, 4 / 45)),
            ExpTail(2.0, INF, 2 / 15, -1.0, 2.0),
        ),
        (-20.0, 36.0),
    )


def gaussian(std: float = 1.0, mean: float = 0.0) -> KernelSpec:
    half = 9.0 * std
    return KernelSpec(f"gaussian(std={std:g})", (GaussianPiece(1.0, mean, std),),
                      (mean - half, mean + half))


def top_hat(radius: float = 1.0, center: float = 0.0) -> KernelSpec:
    return KernelSpec(f"top-hat(radius={radius:g})",
                      (TopHat(center - radius, center + radius, 1.0 / (2 * radius)),),
                      (center - radius - 1.0, center + radius + 1.0))


PRESETS = {
    "paper-example-2.1": lambda **kw: example_2_1(),
    "gaussian": gaussian,
    "top-hat": top_hat,
}


def _piece_from_dict(d: dict) -> Piece:
    lo, hi = (float(v) for v in d.get("interval", (-INF, INF)))
    kind = d["kind"]
    if kind == "exp":
        return ExpTail(lo, hi, float(d["a"]), float(d["b"]), float(d.get("x0", 0.0)))
    if kind == "poly":
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise DivergenceError("polynomial pieces need a bounded interval")
        return PolyPiece(lo, hi, tuple(float(c) for c in d["coeffs"]))
    if kind == "gaussian":
        return GaussianPiece(float(d.get("weight", 1.0)), float(d["mean"]), float(d["std"]), lo, hi)
    if kind == "tophat":
        return TopHat(lo, hi, float(d["height"]))
    raise ValidationError(f"unknown kernel piece kind {kind!r}")


def kernel_from_config(cfg: dict | str) -> KernelSpec:
    """Build a kernel from a preset name or a config mapping.

    ``{"preset": "gaussian", "std": 0.5, "shift": 0.3}`` or
    ``{"name": ..., "pieces": [...], "support_hint": [lo, hi]}``.
    """
    if isinstance(cfg, str):
        cfg = {"preset": cfg}
    cfg = dict(cfg)
    shift = float(cfg.pop("shift", 0.0))
    reflect = bool(cfg.pop("reflect", False))
    if "preset" in cfg:
        name = cfg.pop("preset")
        if name not in PRESETS:
            raise ValidationError(f"unknown kernel preset {name!r}; known: {sorted(PRESETS)}")
        spec = PRESETS[name](**cfg)
    elif "pieces" in cfg:
        pieces = tuple(_piece_from_dict(p) for p in cfg["pieces"])
        spec = KernelSpec(cfg.get("name", "custom"), pieces, tuple(cfg["support_hint"]))
    else:
        raise ValidationError("kernel config needs 'preset' or 'pieces'")
    if shift:
        spec = kernel_shift(spec, shift)
    if reflect:
        spec = kernel_reflect(spec)
    return spec


def with_name(spec: KernelSpec, name: str) -> KernelSpec:
    return replace(spec, name=name)
