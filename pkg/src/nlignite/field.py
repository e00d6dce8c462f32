"""Uniform-grid functions with far-field constants, and the nonlocal operator.

Outside its window a GridFunction is taken to equal its far-field constant on
that side. Convolution uses this extension instead of periodic wrap, since the
profiles here connect two different constant states.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import interpolate, signal

from .errors import DiagnosticError, GridError
from .kernel import SampledKernel
from .reaction import IgnitionNonlinearity


@dataclass(frozen=True)
class GridFunction:
    x0: float
    h: float
    values: np.ndarray = field(repr=False)
    farfield_left: float = 0.0
    farfield_right: float = 0.0

    def __post_init__(self):
        if self.h <= 0:
            raise GridError("grid spacing must be positive")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @classmethod
    def on_window(cls, lo: float, hi: float, h: float, fn, farfield_left=None, farfield_right=None):
        n = int(round((hi - lo) / h)) + 1
        x = lo + h * np.arange(n)
        vals = np.asarray(fn(x), dtype=float)
        fl = float(vals[0]) if farfield_left is None else farfield_left
        fr = float(vals[-1]) if farfield_right is None else farfield_right
        return cls(lo, h, vals, fl, fr)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.n)

    @property
    def x_end(self) -> float:
        return self.x0 + self.h * (self.n - 1)

    def with_values(self, values, farfield_left=None, farfield_right=None) -> "GridFunction":
        return replace(
            self,
            values=np.asarray(values, dtype=float),
            farfield_left=self.farfield_left if farfield_left is None else farfield_left,
            farfield_right=self.farfield_right if farfield_right is None else farfield_right,
        )

    def padded(self, left: int, right: int) -> np.ndarray:
        return np.concatenate(
            [np.full(left, self.farfield_left), self.values, np.full(right, self.farfield_right)]
        )

    def index_of(self, x: float) -> int:
        return int(round((x - self.x0) / self.h))

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _same_grid(self, other)
        return self.with_values(self.values + other.values,
                                self.farfield_left + other.farfield_left,
                                self.farfield_right + other.farfield_right)

    def scaled(self, a: float) -> "GridFunction":
        return self.with_values(a * self.values, a * self.farfield_left, a * self.farfield_right)


def _same_grid(u: GridFunction, v: GridFunction) -> None:
    if u.n != v.n or abs(u.h - v.h) > 1e-15 * u.h or abs(u.x0 - v.x0) > 1e-12 * max(1.0, abs(u.x0)):
        raise GridError("grid functions live on different grids")


def shift(u: GridFunction, m: int) -> GridFunction:
    """u(x - m*h) on the same window, filling from the far fields."""
    if m == 0:
        return u
    p = u.padded(max(m, 0), max(-m, 0))
    start = 0 if m > 0 else -m
    return u.with_values(p[start:start + u.n])


def convolve(kernel: SampledKernel, u: GridFunction, method: str = "direct") -> GridFunction:
    """(J*u)_i = sum_j w_j u_{i-j}, far-field constants supplied outside the window.

    ``method="direct"`` sums in a fixed order per output point; ``"fft"`` is the
    transform-based path used as a cross-check.
    """
    if abs(kernel.h - u.h) > 1e-12 * u.h:
        raise GridError(f"kernel sampled with h={kernel.h} but grid has h={u.h}")
    # index i-j ranges over i - j_max .. i - j_min
    p = u.padded(kernel.reach_right, kernel.reach_left)
    w = kernel.weights
    # pad the weights so that offsets cover 0 when the kernel is one-sided
    if kernel.j_min > 0:
        w = np.concatenate([np.zeros(kernel.j_min), w])
    if kernel.j_max < 0:
        w = np.concatenate([w, np.zeros(-kernel.j_max)])
    if method == "direct":
        out = np.convolve(p, w, mode="valid")
    elif method == "fft":
        out = signal.fftconvolve(p, w, mode="valid")
    else:
        raise ValueError(f"unknown convolution method {method!r}")
    return u.with_values(out)


def convolution_matrix(kernel: SampledKernel, n: int) -> np.ndarray:
    """Dense matrix K with (K v)_i = sum_j w_j v_{i-j}, zero outside the window."""
    K = np.zeros((n, n))
    idx = np.arange(n)
    for off, wj in zip(range(kernel.j_min, kernel.j_max + 1), kernel.weights):
        src = idx - off
        ok = (src >= 0) & (src < n)
        K[idx[ok], src[ok]] += wj
    return K


def apply_operator(kernel: SampledKernel, nl: IgnitionNonlinearity, u: GridFunction) -> GridFunction:
    """Pointwise J*u - u + f(u)."""
    ju = convolve(kernel, u)
    vals = ju.values - u.values + nl.f(u.values)
    fl = float(nl.f(u.farfield_left))
    fr = float(nl.f(u.farfield_right))
    return u.with_values(vals, fl, fr)


# ----------------------------------------------------------------------------
# differences


def centered_stencil(order: int) -> np.ndarray:
    """Coefficients c_k, k = -order/2 .. order/2, of the centred first derivative."""
    if order % 2 or order < 2:
        raise ValueError("order must be an even integer >= 2")
    m = order // 2
    ks = np.arange(-m, m + 1, dtype=float)
    A = np.vander(ks, increasing=True).T
    rhs = np.zeros(order + 1)
    rhs[1] = 1.0
    return np.linalg.solve(A, rhs)


def derivative(u: GridFunction, order: int = 6) -> GridFunction:
    """Centred finite-difference derivative with far-field extension."""
    c = centered_stencil(order) / u.h
    m = order // 2
    p = u.padded(m, m)
    out = np.convolve(p, c[::-1], mode="valid")
    return u.with_values(out, 0.0, 0.0)


def derivative_matrix(n: int, h: float, order: int = 6) -> np.ndarray:
    c = centered_stencil(order) / h
    m = order // 2
    D = np.zeros((n, n))
    idx = np.arange(n)
    for k, ck in zip(range(-m, m + 1), c):
        src = idx + k
        ok = (src >= 0) & (src < n)
        D[idx[ok], src[ok]] += ck
    return D


# ----------------------------------------------------------------------------
# evaluation off the grid


class Interpolant:
    """Smooth interpolation of a GridFunction, constant far fields outside."""

    def __init__(self, u: GridFunction, degree: int = 7):
        self.u = u
        self._spl = interpolate.make_interp_spline(u.x, u.values, k=degree)
        self._lo, self._hi = u.x0, u.x_end

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        left, right = x < self._lo, x > self._hi
        mid = ~(left | right)
        out[left] = self.u.farfield_left
        out[right] = self.u.farfield_right
        out[mid] = self._spl(x[mid])
        return out


def resample(u: GridFunction, x0: float, n: int, offset: float = 0.0) -> GridFunction:
    """Values u(x + offset) on the grid x0 + h*k, k < n."""
    xs = x0 + u.h * np.arange(n) + offset
    return GridFunction(x0, u.h, Interpolant(u)(xs), u.farfield_left, u.farfield_right)


# ----------------------------------------------------------------------------
# front position


def level_crossing(u: GridFunction, level: float) -> float:
    """Leftmost x where u crosses ``level``, by linear interpolation."""
    v = u.values - level
    hits = np.nonzero(v == 0.0)[0]
    sign = np.nonzero(v[:-1] * v[1:] < 0)[0]
    first_hit = hits[0] if hits.size else None
    first_sign = sign[0] if sign.size else None
    if first_hit is None and first_sign is None:
        raise DiagnosticError(f"profile never crosses level {level}")
    if first_sign is None or (first_hit is not None and first_hit <= first_sign):
        return float(u.x0 + u.h * first_hit)
    i = first_sign
    t = v[i] / (v[i] - v[i + 1])
    return float(u.x0 + u.h * (i + t))


# ----------------------------------------------------------------------------
# IO

_HEADER = struct.Struct("<ddqdd")


def write_csv(u: GridFunction, path: str | Path, column: str = "u") -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", column])
        for xi, vi in zip(u.x, u.values):
            w.writerow([repr(float(xi)), repr(float(vi))])
    return path


def read_csv(path: str | Path, farfield_left=None, farfield_right=None) -> GridFunction:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    x, v = data[:, 0], data[:, 1]
    h = float(x[1] - x[0])
    return GridFunction(float(x[0]), h, v,
                        float(v[0]) if farfield_left is None else farfield_left,
                        float(v[-1]) if farfield_right is None else farfield_right)


def write_checkpoint(u: GridFunction, path: str | Path) -> Path:
    """Header (x0, h, n, farfield_left, farfield_right) then n little-endian float64."""
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(u.x0, u.h, u.n, u.farfield_left, u.farfield_right))
        fh.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes())
    return path


def read_checkpoint(path: str | Path) -> GridFunction:
    raw = Path(path).read_bytes()
    x0, h, n, fl, fr = _HEADER.unpack_from(raw, 0)
    vals = np.frombuffer(raw, dtype="<f8", count=n, offset=_HEADER.size).copy()
    return GridFunction(x0, h, vals, fl, fr)
