"""Numerical lab for entire solutions of an ignition nonlocal dispersal equation
with an asymmetric kernel:  u_t = J*u - u + f(u)."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import NligniteError  # noqa: E402

__all__ = ["NligniteError", "__version__"]
