"""Ignition nonlinearity f(u) = amplitude * (u - rho)^q * (1 - u) on [0, 2]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import ConfigurationError, DomainError

# states produced by explicit stepping may leave [0, 2] by rounding
DOMAIN_SLACK = 1e-8


@dataclass(frozen=True)
class IgnitionNonlinearity:
    rho: float = 0.25
    amplitude: float = 1.0
    q: int = 3

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ConfigurationError(f"rho must lie in (0, 1), got {self.rho}")
        if self.amplitude <= 0:
            raise ConfigurationError("amplitude must be positive")
        if int(self.q) != self.q or self.q < 3:
            raise ConfigurationError("q must be an integer >= 3 for f to be C^2")

    @classmethod
    def calibrated(cls, rho: float = 0.25, q: int = 3, fprime_max: float = 0.5) -> "IgnitionNonlinearity":
        """Pick the amplitude so that max_{[0,1]} f' equals ``fprime_max``."""
        unit = cls(rho=rho, amplitude=1.0, q=q)
        return cls(rho=rho, amplitude=fprime_max / unit.fprime_max_exact, q=q)

    def _check(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.size and (u.min() < -DOMAIN_SLACK or u.max() > 2.0 + DOMAIN_SLACK):
            raise DomainError(f"f is defined on [0, 2]; got values in [{u.min()}, {u.max()}]")
        return u

    def f(self, u):
        u = self._check(u)
        s = np.maximum(u - self.rho, 0.0)
        return self.amplitude * s**self.q * (1.0 - u)

    def f_prime(self, u):
        u = self._check(u)
        s = np.maximum(u - self.rho, 0.0)
        d = 1.0 - self.rho
        return self.amplitude * s ** (self.q - 1) * (self.q * d - (self.q + 1) * s)

    def f_second(self, u):
        u = self._check(u)
        s = np.maximum(u - self.rho, 0.0)
        d = 1.0 - self.rho
        q = self.q
        return self.amplitude * q * s ** (q - 2) * ((q - 1) * d - (q + 1) * s)

    @property
    def fprime_at_1(self) -> float:
        return -self.amplitude * (1.0 - self.rho) ** self.q

    @property
    def fprime_max_exact(self) -> float:
        # f'' = 0 at u - rho = (q-1)(1-rho)/(q+1)
        s = (self.q - 1) * (1.0 - self.rho) / (self.q + 1)
        return float(self.f_prime(self.rho + s))

    def to_dict(self) -> dict:
        return {"rho": self.rho, "amplitude": self.amplitude, "q": self.q}


@dataclass(frozen=True)
class ReactionConstants:
    M: float
    L: float
    m0: float
    fprime_max: float

    def to_dict(self) -> dict:
        return {"M": self.M, "L": self.L, "m0": self.m0, "fprime_max": self.fprime_max}


def _golden_max(fn, lo: float, hi: float, tol: float) -> float:
    xs = np.linspace(lo, hi, 201)
    i = int(np.argmax(fn(xs)))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
    if a == b:
        return float(fn(np.array(a)))
    res = optimize.minimize_scalar(lambda u: -float(fn(np.array(u))), bracket=(a, b),
                                   method="golden", tol=tol)
    x = min(max(res.x, lo), hi)
    return max(float(fn(np.array(x))), float(fn(xs).max()))


def derive_constants(nl: IgnitionNonlinearity, tol: float = 1e-12) -> ReactionConstants:
    """M = max f on [0,1], L = max f'' on [0,2], max f' on [0,1], and m0.

    m0 is the largest value in (0, 1) with f' < 0 on (1 - m0, 2); it is located
    by bisection on the zero of f' between its maximiser and 1.
    """
    fpm = _golden_max(nl.f_prime, 0.0, 1.0, tol)
    if fpm >= 1.0:
        raise ConfigurationError(
            f"max f' on [0,1] is {fpm:.6g} >= 1; reduce the amplitude",
            fprime_max=fpm,
        )
    M = _golden_max(nl.f, 0.0, 1.0, tol)
    L = _golden_max(nl.f_second, 0.0, 2.0, tol)
    s_peak = (nl.q - 1) * (1.0 - nl.rho) / (nl.q + 1)
    u_zero = optimize.bisect(lambda u: float(nl.f_prime(u)), nl.rho + s_peak, 1.0, xtol=1e-15)
    return ReactionConstants(M=M, L=L, m0=1.0 - u_zero, fprime_max=fpm)


def reaction_from_config(cfg: dict | None) -> IgnitionNonlinearity:
    cfg = dict(cfg or {})
    rho = float(cfg.get("rho", 0.25))
    q = int(cfg.get("q", 3))
    amp, target = cfg.get("amplitude"), cfg.get("fprime_max")
    if amp is not None and target is not None:
        raise ConfigurationError("give either 'amplitude' or 'fprime_max', not both")
    if amp is not None:
        return IgnitionNonlinearity(rho=rho, amplitude=float(amp), q=q)
    return IgnitionNonlinearity.calibrated(rho=rho, q=q, fprime_max=float(target if target is not None else 0.5))
