"""Asymptotic expansions of phi at the two ends and the smooth-extension verdict.

Near w = 0 a metric of this type extends smoothly over the zero section when
``phi = a0 + a1 x + a2 x^2 + ...`` with ``a0, a1 > 0``; near w = infinity it
extends over the section at infinity when ``phi = b0 + b1 x + b2 x^2 + ...``
with ``b0 > 0, b1 < 0``.  Here ``x = w^k`` at zero and ``x = w^-k`` at
infinity, k the twist.  For k = 1 this is Calabi's criterion; for k > 1 the
verdict carries a ``heuristic`` flag.

The coefficients are obtained by least squares over geometrically spaced x,
not symbolically.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .profile import Mode, RadialProfile, sample

__all__ = ["End", "ExpansionFit", "ExtensionVerdict", "fit_expansion", "check_extension",
           "DEFAULT_WINDOW", "VALID_RESIDUAL"]

DEFAULT_WINDOW = (1e-8, 1e-4)
VALID_RESIDUAL = 1e-8


class End(str, Enum):
    ZERO = "zero"
    INFINITY = "infinity"


@dataclass(frozen=True)
class ExpansionFit:
    """Quadratic fit of phi in the expansion variable x at one end.

    ``fit_residual`` is the max deviation of the fit relative to max |phi|
    over the samples; ``window`` is the x-range sampled.
    """

    end: End
    coefficients: tuple
    fit_residual: float
    window: tuple

    @property
    def valid(self) -> bool:
        return bool(np.isfinite(self.fit_residual) and self.fit_residual <= VALID_RESIDUAL)

    @property
    def sign_condition(self) -> bool:
        c0, c1, _ = self.coefficients
        return c0 > 0 and (c1 > 0 if self.end is End.ZERO else c1 < 0)


@dataclass(frozen=True)
class ExtensionVerdict:
    extends_at_zero: bool
    extends_at_infinity: bool
    witnesses: tuple
    heuristic: bool


def _window(profile: RadialProfile, window):
    lo, hi = window if window is not None else DEFAULT_WINDOW
    if not 0 < lo < hi:
        raise ValueError("window must satisfy 0 < lo < hi")
    if profile.mode is Mode.PAPER_SMOOTHED:
        # stay on the rays |r| >= delta where the closed forms hold
        limit = np.exp(-profile.params.k * profile.params.delta)
        if hi > limit:
            lo, hi = lo * limit / hi, limit
    return lo, hi


def fit_expansion(profile: RadialProfile, end, samples: int = 32, window=None) -> ExpansionFit:
    """Least-squares fit of phi against 1, x, x^2 at the requested end."""
    end = End(end)
    if samples < 6:
        raise ValueError("need at least 6 samples")
    lo, hi = _window(profile, window)
    k = profile.params.k
    x = np.geomspace(lo, hi, samples)
    r = np.log(x) / k if end is End.ZERO else -np.log(x) / k
    with np.errstate(over="ignore", invalid="ignore"):
        phi = sample(profile, r).phi
    if not np.all(np.isfinite(phi)):
        return ExpansionFit(end, (np.nan, np.nan, np.nan), np.inf, (lo, hi))
    u = x / hi
    design = np.column_stack([np.ones_like(u), u, u**2])
    coef, *_ = np.linalg.lstsq(design, phi, rcond=None)
    residual = float(np.max(np.abs(design @ coef - phi)) / np.max(np.abs(phi)))
    coefficients = (float(coef[0]), float(coef[1] / hi), float(coef[2] / hi**2))
    return ExpansionFit(end, coefficients, residual, (lo, hi))


def check_extension(profile: RadialProfile, samples: int = 32) -> ExtensionVerdict:
    """Fit both ends and apply the sign tests; failure is a verdict, never an error."""
    zero = fit_expansion(profile, End.ZERO, samples)
    inf = fit_expansion(profile, End.INFINITY, samples)
    return ExtensionVerdict(
        extends_at_zero=zero.valid and zero.sign_condition,
        extends_at_infinity=inf.valid and inf.sign_condition,
        witnesses=(zero, inf),
        heuristic=profile.params.k > 1,
    )
