"""Radial Kähler profiles for U(n)-invariant metrics on C^n minus the origin.

A U(n)-invariant Kähler potential depends on ``z`` only through
``r = log |z|^2``.  Writing ``phi = dP/dr``, the metric and its Ricci form are
determined by ``phi`` and ``psi = dG/dr`` with ``G = -log det g``.

The profiles built here solve

    d/dr log(phi**(n-1) * phi_r) = k * a(r),

so ``phi**(n-1) * phi_r = exp(f)`` with ``f' = k a`` and
``phi = (n F + c)**(1/n)``, ``F = int_{-inf}^r exp(f)``.  With this choice
``psi = n - k a`` holds identically.  Two slope functions are supported:

``paper-smoothed``
    ``a = +1`` for ``r <= -delta``, ``a = -1`` for ``r >= delta``, and a smooth
    odd, strictly decreasing transition in between.  Everything outside
    ``[-delta, delta]`` is closed form; the transition uses composite
    Gauss-Legendre quadrature.
``knopf-constant``
    ``a = 1`` everywhere (``k = 1`` only), giving ``phi = (n e^r + c)**(1/n)``.
    This metric is complete but does not close up at infinity.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import mpmath
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import expit

__all__ = [
    "Mode",
    "ProfileParams",
    "ProfileSample",
    "RadialProfile",
    "build_profile",
    "sample",
    "f_total_integral",
    "potential",
    "radial_mp",
    "smooth_step",
]

_GL_ORDER = 20
_GL_NODES, _GL_WEIGHTS = leggauss(_GL_ORDER)
# s(t) underflows to exactly 0 (or 1) in double precision inside this margin
_STEP_CUTOFF = 1e-3
_QUAD_RTOL = 1e-13
_MAX_PANELS = 1024


class Mode(str, enum.Enum):
    PAPER_SMOOTHED = "paper-smoothed"
    KNOPF_CONSTANT = "knopf-constant"


@dataclass(frozen=True)
class ProfileParams:
    """Free parameters of the construction.

    n is the complex dimension, k the twist of the bundle, c the cap constant
    (sets the size of the section glued in at ``z = 0``) and delta the
    half-width of the interval on which the slope changes sign.
    """

    n: int = 2
    k: int = 1
    c: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"complex dimension n must be an integer >= 2, got {self.n}")
        if int(self.k) != self.k or not 1 <= self.k <= self.n - 1:
            raise ValueError(f"twist k must satisfy 1 <= k <= n-1, got k={self.k}, n={self.n}")
        if not np.isfinite(self.c) or self.c <= 0:
            raise ValueError(f"cap constant c must be positive, got {self.c}")
        if not np.isfinite(self.delta) or self.delta <= 0:
            raise ValueError(f"smoothing half-width delta must be positive, got {self.delta}")


@dataclass(frozen=True)
class ProfileSample:
    """Profile quantities at one or more values of r.

    ``a`` is the unit slope in [-1, 1]; the log-density satisfies ``f_r = k a``.
    Fields are scalars or arrays matching the shape of ``r``.
    """

    r: np.ndarray
    a: np.ndarray
    a_r: np.ndarray
    a_rr: np.ndarray
    f: np.ndarray
    F: np.ndarray
    phi: np.ndarray
    phi_r: np.ndarray
    phi_rr: np.ndarray
    psi: np.ndarray
    psi_r: np.ndarray
    psi_rr: np.ndarray
    G: np.ndarray


def smooth_step(t, dtype=np.float64):
    """C-infinity step s(t) = sigma(t) / (sigma(t) + sigma(1 - t)), sigma(t) = exp(-1/t).

    Returns ``(s, s', s'')``.  Written in logistic form,
    ``s = expit(1/(1-t) - 1/t)``, which is stable across the whole interval.
    """
    t = np.asarray(t, dtype=dtype)
    s = np.where(t >= 1, 1, 0).astype(dtype)
    ds = np.zeros_like(s)
    d2s = np.zeros_like(s)
    inside = (t > _STEP_CUTOFF) & (t < 1 - _STEP_CUTOFF)
    if np.any(inside):
        ti = t[inside]
        u = 1 - ti
        z = 1 / u - 1 / ti
        si = expit(z)
        w = si * (1 - si)
        dz = 1 / u**2 + 1 / ti**2
        d2z = 2 / u**3 - 2 / ti**3
        s[inside] = si
        ds[inside] = w * dz
        d2s[inside] = w * ((1 - 2 * si) * dz**2 + d2z)
    s[(t >= 1 - _STEP_CUTOFF) & (t < 1)] = 1
    return s, ds, d2s


@dataclass(frozen=True)
class RadialProfile:
    """Immutable evaluator for one radial profile.

    Build with :func:`build_profile`.  For the paper-smoothed mode the
    transition interval is split into ``len(panel_edges) - 1`` equal panels;
    ``f_edges`` and ``F_edges`` hold f and F at the panel edges.
    """

    params: ProfileParams
    mode: Mode
    f_infinity_total: float
    panel_edges: np.ndarray = field(repr=False)
    f_edges: np.ndarray = field(repr=False)
    F_edges: np.ndarray = field(repr=False)

    # slope -------------------------------------------------------------
    def slope(self, r, dtype=np.float64):
        """Return ``(a, a_r, a_rr)`` for the unit slope a(r)."""
        r = np.asarray(r, dtype=dtype)
        if self.mode is Mode.KNOPF_CONSTANT:
            one = np.ones_like(r)
            return one, 0 * one, 0 * one
        delta = dtype(self.params.delta)
        s, ds, d2s = smooth_step((r + delta) / (2 * delta), dtype=dtype)
        return 1 - 2 * s, -ds / delta, -d2s / (2 * delta**2)

    # transition quadrature ---------------------------------------------
    def _panel_index(self, r):
        width = self.panel_edges[1] - self.panel_edges[0]
        idx = np.floor((r - self.panel_edges[0]) / width).astype(int)
        return np.clip(idx, 0, len(self.panel_edges) - 2)

    def _f_inside(self, r, dtype):
        """f on [-delta, delta] by Gauss-Legendre from the left panel edge."""
        k = self.params.k
        j = self._panel_index(np.asarray(r, dtype=np.float64))
        left = self.panel_edges[j].astype(dtype)
        half = (r - left) / 2
        x = left[..., None] + half[..., None] * (1 + _GL_NODES.astype(dtype))
        a, _, _ = self.slope(x, dtype=dtype)
        return self.f_edges[j].astype(dtype) + k * half * np.sum(_GL_WEIGHTS.astype(dtype) * a, axis=-1)

    def _F_inside(self, r, dtype):
        j = self._panel_index(np.asarray(r, dtype=np.float64))
        left = self.panel_edges[j].astype(dtype)
        half = (r - left) / 2
        x = left[..., None] + half[..., None] * (1 + _GL_NODES.astype(dtype))
        ef = np.exp(self._f_inside(x, dtype))
        return self.F_edges[j].astype(dtype) + half * np.sum(_GL_WEIGHTS.astype(dtype) * ef, axis=-1)

    # log-density and cumulative integral -------------------------------
    def f(self, r, dtype=np.float64):
        r = np.asarray(r, dtype=dtype)
        k = self.params.k
        if self.mode is Mode.KNOPF_CONSTANT:
            return r.copy()
        delta = self.params.delta
        out = np.where(r <= -delta, k * r, -k * r).astype(dtype)
        mid = (r > -delta) & (r < delta)
        if np.any(mid):
            out[mid] = self._f_inside(r[mid], dtype)
        return out

    def F(self, r, dtype=np.float64):
        r = np.asarray(r, dtype=dtype)
        k = self.params.k
        if self.mode is Mode.KNOPF_CONSTANT:
            return np.exp(r)
        delta = self.params.delta
        left = np.exp(k * np.minimum(r, -delta)) / k
        right = dtype(self.f_infinity_total) - np.exp(-k * np.maximum(r, delta)) / k
        out = np.where(r <= -delta, left, right).astype(dtype)
        mid = (r > -delta) & (r < delta)
        if np.any(mid):
            out[mid] = self._F_inside(r[mid], dtype)
        return out

    def cap_power(self, r, dtype=np.float64):
        """n F + c, i.e. phi**n, evaluated without cancellation on both rays."""
        r = np.asarray(r, dtype=dtype)
        n, k, c = self.params.n, self.params.k, self.params.c
        if self.mode is Mode.PAPER_SMOOTHED:
            delta = self.params.delta
            upper = dtype(n * self.f_infinity_total + c)
            right = upper - (n / dtype(k)) * np.exp(-k * np.maximum(r, delta))
            return np.where(r >= delta, right, n * self.F(r, dtype) + c)
        return n * self.F(r, dtype) + c

    def __call__(self, r, dtype=np.float64) -> ProfileSample:
        return sample(self, r, dtype=dtype)


def _panel_integrals(delta, k, panels):
    """f and F at panel edges plus the transition integral, for a given panel count."""
    edges = np.linspace(-delta, delta, panels + 1)
    proto = RadialProfile(
        params=ProfileParams(n=k + 1, k=k, c=1.0, delta=delta),
        mode=Mode.PAPER_SMOOTHED,
        f_infinity_total=np.nan,
        panel_edges=edges,
        f_edges=np.zeros(panels + 1),
        F_edges=np.zeros(panels + 1),
    )
    half = (edges[1] - edges[0]) / 2
    f_edges = np.empty(panels + 1)
    f_edges[0] = -k * delta
    F_edges = np.empty(panels + 1)
    F_edges[0] = np.exp(-k * delta) / k
    for j in range(panels):
        x = edges[j] + half * (1 + _GL_NODES)
        a, _, _ = proto.slope(x)
        f_edges[j + 1] = f_edges[j] + k * half * np.dot(_GL_WEIGHTS, a)
        # f at this panel's nodes, needed before F can be accumulated
        object.__setattr__(proto, "f_edges", f_edges)
        fx = proto._f_inside(x, np.float64)
        F_edges[j + 1] = F_edges[j] + half * np.dot(_GL_WEIGHTS, np.exp(fx))
    return edges, f_edges, F_edges


def build_profile(params: ProfileParams | None = None, mode: Mode | str = Mode.PAPER_SMOOTHED) -> RadialProfile:
    """Construct the radial profile for ``params`` in the requested mode.

    For the paper-smoothed mode the number of quadrature panels is doubled
    until the transition integral is stable to 1e-13 relative.
    """
    params = params or ProfileParams()
    mode = Mode(mode)
    if mode is Mode.KNOPF_CONSTANT:
        if params.k != 1:
            raise ValueError("knopf-constant mode requires k = 1")
        empty = np.zeros(0)
        return RadialProfile(params, mode, np.inf, empty, empty, empty)

    k, delta = params.k, params.delta
    panels = 2
    edges, f_edges, F_edges = _panel_integrals(delta, k, panels)
    while True:
        panels *= 2
        new = _panel_integrals(delta, k, panels)
        prev_total, total = F_edges[-1], new[2][-1]
        edges, f_edges, F_edges = new
        if abs(total - prev_total) <= _QUAD_RTOL * abs(total) or panels >= _MAX_PANELS:
            break
    f_inf = F_edges[-1] + np.exp(-k * delta) / k
    return RadialProfile(params, mode, float(f_inf), edges, f_edges, F_edges)


def sample(profile: RadialProfile, r, dtype=np.float64) -> ProfileSample:
    """Evaluate every profile quantity at ``r`` (scalar or array)."""
    r = np.asarray(r, dtype=dtype)
    if not np.all(np.isfinite(r)):
        raise ValueError("r must be finite")
    n, k = profile.params.n, profile.params.k
    scalar = r.ndim == 0
    r = np.atleast_1d(r)

    a, a_r, a_rr = profile.slope(r, dtype=dtype)
    f = profile.f(r, dtype=dtype)
    F = profile.F(r, dtype=dtype)
    phi = profile.cap_power(r, dtype=dtype) ** (dtype(1) / n)
    ef = np.exp(f)
    phi_r = ef / phi ** (n - 1)
    phi_rr = (k * a * ef - (n - 1) * ef * phi_r / phi) / phi ** (n - 1)
    psi = n - k * a
    psi_r = -k * a_r
    psi_rr = -k * a_rr
    G = n * r - (n - 1) * np.log(phi) - np.log(phi_r)

    values = dict(r=r, a=a, a_r=a_r, a_rr=a_rr, f=f, F=F, phi=phi, phi_r=phi_r,
                  phi_rr=phi_rr, psi=psi, psi_r=psi_r, psi_rr=psi_rr, G=G)
    if scalar:
        values = {key: val[0] for key, val in values.items()}
    return ProfileSample(**values)


def f_total_integral(profile: RadialProfile) -> float:
    """Total mass F_inf = int_R exp(f); finite only for the paper-smoothed mode."""
    if profile.mode is Mode.KNOPF_CONSTANT:
        raise ValueError("no cap at infinity: int exp(f) diverges for the constant slope a = 1")
    return profile.f_infinity_total


def potential(profile: RadialProfile, r, dtype=np.float64):
    """Kähler potential P(r) = int_0^r phi, normalised by P(0) = 0.

    Composite Gauss-Legendre with breakpoints at 0 and +-delta and panels of
    width at most 1/2.
    """
    r_arr = np.atleast_1d(np.asarray(r, dtype=dtype))
    delta = profile.params.delta
    out = np.empty_like(r_arr)
    for i, ri in enumerate(r_arr):
        lo, hi = (ri, dtype(0)) if ri < 0 else (dtype(0), ri)
        cuts = [lo] + [b for b in (-delta, delta) if lo < b < hi] + [hi]
        total = dtype(0)
        for x0, x1 in zip(cuts[:-1], cuts[1:]):
            pieces = max(1, int(np.ceil(float(x1 - x0) / 0.5)))
            bounds = np.linspace(x0, x1, pieces + 1, dtype=dtype)
            half = (bounds[1:] - bounds[:-1]) / 2
            x = bounds[:-1, None] + half[:, None] * (1 + _GL_NODES.astype(dtype))
            phi = profile.cap_power(x, dtype) ** (dtype(1) / profile.params.n)
            total += np.sum(half * np.sum(_GL_WEIGHTS.astype(dtype) * phi, axis=-1))
        out[i] = total if ri >= 0 else -total
    return out[0] if np.ndim(r) == 0 else out


def _ld_to_mp(x):
    num, den = np.longdouble(x).as_integer_ratio()
    return mpmath.mpf(num) / den


def radial_mp(profile: RadialProfile, r):
    """``(phi, phi_r)`` at an mpmath ``r``, in the current mpmath precision.

    Exact closed forms where they exist (the knopf profile and the rays
    ``|r| >= delta``).  Inside the transition the extended-precision sample at
    the rounded ``r`` is corrected to first order in the rounding, so the
    result is a smooth function of ``r`` to about 1e-19 relative.
    """
    p = profile.params
    n, k = p.n, p.k
    r = mpmath.mpf(r)
    if profile.mode is Mode.KNOPF_CONSTANT or r <= -p.delta:
        f = k * r
        F = mpmath.exp(f) / k
    elif r >= p.delta:
        f = -k * r
        F = _ld_to_mp(profile.f_infinity_total) - mpmath.exp(f) / k
    else:
        rounded = np.longdouble(mpmath.nstr(r, 30))
        s = sample(profile, rounded, dtype=np.longdouble)
        shift = r - _ld_to_mp(rounded)
        phi_r = _ld_to_mp(s.phi_r)
        return _ld_to_mp(s.phi) + phi_r * shift, phi_r + _ld_to_mp(s.phi_rr) * shift
    phi = (n * F + _ld_to_mp(p.c)) ** (mpmath.mpf(1) / n)
    return phi, mpmath.exp(f) / phi ** (n - 1)
