"""Metric and Ricci matrices of a U(n)-invariant Kähler metric at points of C^n.

Both tensors have the form ``A delta_ab + B conj(z_a) z_b`` with

    g:   A = phi / w,  A + B w = phi_r / w
    Ric: A = psi / w,  A + B w = psi_r / w

so the radial direction carries ``phi_r`` (resp. ``psi_r``) and the
orthogonal complement carries ``phi`` (resp. ``psi``).  The Ricci eigenvalues
relative to g are therefore ``psi_r / phi_r`` (once) and ``psi / phi``
(``n - 1`` times); :func:`ricci_eigenpairs` recovers them numerically from the
dense matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath
import numpy as np
import scipy.linalg

from .profile import RadialProfile, potential, radial_mp, sample

__all__ = [
    "PointCoordinates",
    "HermitianForm",
    "RicciEigenpair",
    "metric_at",
    "ricci_at",
    "ricci_eigenpairs",
    "check_ricci_identity",
    "check_ricci_identity_mp",
    "check_metric_potential",
    "complex_hessian",
    "log_det",
    "dense_structure_errors",
]

_COMPLEX = {np.dtype(np.float64): np.complex128, np.dtype(np.longdouble): np.clongdouble}


@dataclass(frozen=True)
class PointCoordinates:
    """A point of C^n minus the origin, with w = |z|^2 and r = log w."""

    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z)
        if z.ndim != 1 or z.size < 2:
            raise ValueError("z must be a vector of n >= 2 complex coordinates")
        if not np.all(np.isfinite(z)):
            raise ValueError("z must be finite")
        if not np.any(z != 0):
            raise ValueError("z = 0 is not a point of C^n minus the origin")
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.z.size

    @property
    def w(self):
        return np.sum(np.abs(self.z) ** 2)

    @property
    def r(self):
        return np.log(self.w)

    def rotated(self, theta: float) -> "PointCoordinates":
        return PointCoordinates(self.z * np.exp(1j * theta))


def _as_point(z, dtype=np.float64) -> PointCoordinates:
    if isinstance(z, PointCoordinates):
        z = z.z
    return PointCoordinates(np.asarray(z, dtype=_COMPLEX[np.dtype(dtype)]))


@dataclass(frozen=True)
class HermitianForm:
    """Dense n x n Hermitian matrix; ``entries[a, b]`` is the (a, b-bar) component."""

    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def hermitian_defect(self) -> float:
        e = self.entries
        scale = max(float(np.max(np.abs(e))), np.finfo(float).tiny)
        return float(np.max(np.abs(e - e.conj().T))) / scale

    def det(self):
        return _det(self.entries).real

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries.astype(np.complex128))


@dataclass(frozen=True)
class RicciEigenpair:
    """Eigenvalue of Ric relative to g, with an orthonormal (w.r.t. g) eigenbasis.

    ``basis`` has shape ``(n, multiplicity)``; ``eigenvector`` is its first column.
    """

    value: float
    multiplicity: int
    basis: np.ndarray

    @property
    def eigenvector(self) -> np.ndarray:
        return self.basis[:, 0]


def _det(m):
    """Determinant by partial-pivot elimination; works for extended precision too."""
    if m.dtype == np.complex128:
        return np.linalg.det(m)
    a = m.copy()
    n = a.shape[0]
    det = a.dtype.type(1)
    for j in range(n):
        p = j + int(np.argmax(np.abs(a[j:, j])))
        if a[p, j] == 0:
            return a.dtype.type(0)
        if p != j:
            a[[j, p]] = a[[p, j]]
            det = -det
        det *= a[j, j]
        a[j + 1:, j:] -= np.outer(a[j + 1:, j] / a[j, j], a[j, j:])
    return det


def log_det(form: HermitianForm):
    return np.log(form.det())


def _invariant_form(point: PointCoordinates, tangential, radial) -> HermitianForm:
    """Assemble ``(tangential (w - |z|^2 proj) + radial proj) / w``.

    Diagonal entries use ``(tangential * sum_{c != a}|z_c|^2 + radial |z_a|^2) / w^2``
    so that no cancellation occurs when the two coefficients differ greatly.
    """
    z = point.z
    w = point.w
    outer = np.outer(z.conj(), z)
    entries = (radial - tangential) * outer / w**2
    mod2 = np.abs(z) ** 2
    diag = (tangential * (w - mod2) + radial * mod2) / w**2
    entries[np.diag_indices_from(entries)] = diag
    return HermitianForm(entries)


def metric_at(profile: RadialProfile, z, dtype=np.float64) -> HermitianForm:
    """g_ab = e^{-r} phi delta_ab + e^{-2r} (phi_r - phi) conj(z_a) z_b."""
    point = _as_point(z, dtype)
    _check_dimension(profile, point)
    s = sample(profile, point.r, dtype=dtype)
    return _invariant_form(point, s.phi, s.phi_r)


def ricci_at(profile: RadialProfile, z, dtype=np.float64) -> HermitianForm:
    """R_ab = e^{-r} psi delta_ab + e^{-2r} (psi_r - psi) conj(z_a) z_b."""
    point = _as_point(z, dtype)
    _check_dimension(profile, point)
    s = sample(profile, point.r, dtype=dtype)
    return _invariant_form(point, s.psi, s.psi_r)


def _check_dimension(profile, point):
    if point.n != profile.params.n:
        raise ValueError(f"point has {point.n} coordinates but the profile has n={profile.params.n}")


def _group(values, vectors, rtol):
    pairs = []
    scale = max(float(np.max(np.abs(values))), 1.0)
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or abs(values[i] - values[start]) > rtol * scale:
            pairs.append(RicciEigenpair(float(np.mean(values[start:i])), i - start, vectors[:, start:i]))
            start = i
    return pairs


def ricci_eigenpairs(profile: RadialProfile, z, group_rtol: float = 1e-8) -> list[RicciEigenpair]:
    """Solve R W = lambda g W and group (numerically) equal eigenvalues.

    Uses the Cholesky congruence of the Hermitian-definite pencil.  Returned
    in ascending order of value.
    """
    g = metric_at(profile, z).entries
    ric = ricci_at(profile, z).entries
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(ric))):
        raise ValueError("non-finite metric or Ricci entries")
    values, vectors = scipy.linalg.eigh(ric, g)
    return _group(values, vectors, group_rtol)


def complex_hessian(func, z, h: float = 1e-4, dtype=np.float64) -> np.ndarray:
    """Central-difference approximation of d^2 func / dz_a d conj(z_b).

    ``func`` takes a complex vector and returns a real number.  The real
    Hessian in (x_1, y_1, ..., x_n, y_n) is assembled from second-order
    central stencils and combined via d_z = (d_x - i d_y) / 2.  With
    ``dtype=object`` the arithmetic is done on mpmath numbers.
    """
    if dtype is object:
        ctype = object
        z = np.array([mpmath.mpc(complex(v)) for v in np.ravel(z)], dtype=object)
        h = mpmath.mpf(h)
    else:
        ctype = _COMPLEX[np.dtype(dtype)]
        z = np.asarray(z, dtype=ctype)
        h = dtype(h)
    n = z.size
    steps = []
    for a in range(n):
        e = np.zeros(n, dtype=ctype)
        e[a] = h
        steps.append(e)
        steps.append(1j * e)
    m = 2 * n
    center = func(z)
    hess = np.empty((m, m), dtype=dtype)
    for i in range(m):
        hess[i, i] = (func(z + steps[i]) - 2 * center + func(z - steps[i])) / h**2
        for j in range(i + 1, m):
            pp = func(z + steps[i] + steps[j])
            pm = func(z + steps[i] - steps[j])
            mp = func(z - steps[i] + steps[j])
            mm = func(z - steps[i] - steps[j])
            hess[i, j] = hess[j, i] = (pp - pm - mp + mm) / (4 * h**2)
    x, y = slice(0, m, 2), slice(1, m, 2)
    return (hess[x, x] + hess[y, y] + 1j * (hess[x, y] - hess[y, x])) / 4


def check_ricci_identity(profile: RadialProfile, z, h: float = 1e-4, dtype=np.longdouble) -> float:
    """Max-norm gap between ``ricci_at`` and -d dbar log det g by finite differences.

    The stencil is evaluated in ``dtype``; the default extended precision keeps
    rounding noise (amplified by 1/h^2) well below the O(h^2) truncation error.
    """
    point = _as_point(z)
    if h >= np.sqrt(point.w) / 4:
        raise ValueError("step too large: stencil would approach the origin")

    def G(zz):
        return -np.log(_det(metric_at(profile, zz, dtype=dtype).entries).real)

    fd = complex_hessian(G, point.z, h, dtype=dtype)
    exact = ricci_at(profile, point.z, dtype=dtype).entries
    return float(np.max(np.abs(fd - exact)))


def check_ricci_identity_mp(profile: RadialProfile, z, h: float = 1e-4, dps: int = 30) -> float:
    """As :func:`check_ricci_identity`, with the difference stencil in ``dps`` digits.

    The metric is assembled from :func:`radial_mp` and its determinant taken in
    multiprecision.  In extended precision the cancellation inside det g
    (condition ~ phi/phi_r) leaves a rounding floor near 1e-10 at h = 1e-4,
    which hides the O(h^2) term wherever that term is small (large |z|).
    """
    point = _as_point(z)
    if h >= np.sqrt(point.w) / 4:
        raise ValueError("step too large: stencil would approach the origin")
    with mpmath.workdps(dps):
        def G(zz):
            w = mpmath.fsum(abs(x) ** 2 for x in zz)
            phi, phi_r = radial_mp(profile, mpmath.log(w))
            return -mpmath.log(mpmath.re(mpmath.det(_mp_invariant_form(list(zz), phi, phi_r))))

        fd = complex_hessian(G, point.z, h, dtype=object)
        fd = np.array([[complex(v) for v in row] for row in fd])
    exact = ricci_at(profile, point.z, dtype=np.longdouble).entries.astype(np.complex128)
    return float(np.max(np.abs(fd - exact)))


def check_metric_potential(profile: RadialProfile, z, h: float = 1e-4, dtype=np.longdouble) -> float:
    """Max-norm gap between ``metric_at`` and the complex Hessian of P(log |z|^2)."""
    point = _as_point(z)

    def P(zz):
        return potential(profile, np.log(np.sum(np.abs(zz) ** 2)), dtype=dtype)

    fd = complex_hessian(P, point.z, h, dtype=dtype)
    exact = metric_at(profile, point.z, dtype=dtype).entries
    return float(np.max(np.abs(fd - exact)))


def _mp_invariant_form(z, tangential, radial):
    w = mpmath.fsum(abs(x) ** 2 for x in z)
    n = len(z)
    m = mpmath.matrix(n, n)
    for a in range(n):
        for b in range(n):
            m[a, b] = (radial - tangential) * mpmath.conj(z[a]) * z[b] / w**2
        m[a, a] += tangential / w
    return m


def dense_structure_errors(profile: RadialProfile, z, dps: int = 40) -> dict:
    """Relative errors of det g and of the Ricci eigenvalues against closed forms.

    The dense matrices are formed and factorised with ``dps`` significant
    digits from the double-precision profile values, so the check isolates the
    matrix formulas from the conditioning of g (which grows like e^|r|).
    Returns ``{"det": ..., "eigenvalues": ..., "values": [...]}``.
    """
    point = _as_point(z)
    _check_dimension(profile, point)
    n = point.n
    s = sample(profile, point.r)
    with mpmath.workdps(dps):
        zz = [mpmath.mpc(complex(x)) for x in point.z]
        phi, phi_r, psi, psi_r = (mpmath.mpf(float(v)) for v in (s.phi, s.phi_r, s.psi, s.psi_r))
        w = mpmath.fsum(abs(x) ** 2 for x in zz)
        g = _mp_invariant_form(zz, phi, phi_r)
        ric = _mp_invariant_form(zz, psi, psi_r)
        det_exact = phi ** (n - 1) * phi_r / w**n
        det_err = abs(mpmath.det(g).real / det_exact - 1)
        low = mpmath.cholesky(g)
        low_inv = mpmath.inverse(low)
        reduced = low_inv * ric * low_inv.transpose_conj()
        reduced = (reduced + reduced.transpose_conj()) / 2
        values = sorted(float(v) for v in mpmath.eighe(reduced, eigvals_only=True))
        expected = sorted([float(psi_r / phi_r)] + [float(psi / phi)] * (n - 1))
    scale = max(abs(v) for v in expected)
    eig_err = max(abs(a - b) for a, b in zip(values, expected)) / scale
    return {"det": float(det_err), "eigenvalues": eig_err, "values": values}
