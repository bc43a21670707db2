"""Kähler-Ricci flow of a U(n)-invariant metric, reduced to one radial variable.

At fixed r the flow is ``phi_t = -psi`` with

    psi = n - (n-1) phi_r/phi - phi_rr/phi_r,

a quasilinear parabolic equation whose diffusion coefficient ``1/phi_r`` grows
like ``e^{k|r|}`` towards both caps.  Two consequences shape the solver:

* Near the caps ``phi`` differs from its limit by ``O(e^{-k|r|})``, far below
  double-precision resolution of ``phi`` itself.  The state therefore carries
  three fields on the r-grid: ``phi``, ``mu = log phi_r`` (relative precision
  for phi_r) and ``eta = psi - psi_0`` (the change of psi from its initial
  profile, which decays like ``e^{-k|r|}`` and so is resolved relatively).
  They evolve by

      phi_t = -psi,   mu_t = -psi_r / phi_r,
      eta_t = psi_rr/phi_r - (phi_rr/phi_r^2 - (n-1)/phi) psi_r - (n-1) phi_r psi / phi^2,

  with ``phi_rr/phi_r = n - psi - (n-1) phi_r/phi``.
* The system is extremely stiff, so time stepping is linearly implicit:
  extrapolated linearly-implicit Euler (step sequence 1, 2, 3, 4; order 4)
  with the exact sparse Jacobian.

``eta`` satisfies the Robin closure ``eta_r = +kappa_L eta`` at ``r_min`` and
``eta_r = -kappa_R eta`` at ``r_max``, the decay rates of the exact solution
(``kappa = k`` at a closing cap, ``1/n`` at the open end of the knopf profile).
Spatial derivatives use fourth-order stencils, one-sided near the ends.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .profile import Mode, ProfileParams, RadialProfile, sample

__all__ = [
    "SolverConfig",
    "FlowState",
    "FlowInvariantError",
    "init_state",
    "rhs",
    "psi_from_phi",
    "psi_equation_rhs",
    "step",
    "evolve",
    "psi_equation_residual",
    "analytic_dt_psi_r",
    "derivative_matrices",
]

log = logging.getLogger(__name__)

_EXTRAPOLATION_SEQUENCE = (1, 2, 3, 4)


class FlowInvariantError(RuntimeError):
    """The discrete Kähler condition or finiteness failed during evolution."""

    def __init__(self, message, node=None):
        super().__init__(message if node is None else f"{message} (node {node})")
        self.node = node


@dataclass(frozen=True)
class SolverConfig:
    r_min: float = -40.0
    r_max: float = 40.0
    m: int = 4096
    cfl_safety: float = 0.2
    t_end: float = 1e-3
    snapshot_times: tuple = ()

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 256:
            raise ValueError(f"grid needs m >= 256 points, got {self.m}")
        if not self.r_min < self.r_max:
            raise ValueError("r_min must be below r_max")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if not 0 <= self.t_end <= 0.1:
            raise ValueError("t_end must lie in [0, 0.1]: only the short-time regime is supported")
        times = tuple(float(t) for t in self.snapshot_times)
        if any(t < 0 or t > self.t_end for t in times):
            raise ValueError("snapshot times must lie in [0, t_end]")
        object.__setattr__(self, "snapshot_times", times)

    @property
    def dr(self) -> float:
        return (self.r_max - self.r_min) / (self.m - 1)

    def grid(self) -> np.ndarray:
        return np.linspace(self.r_min, self.r_max, self.m)

    def validate_for(self, params: ProfileParams):
        if not (self.r_min < -params.delta - 5 and self.r_max > params.delta + 5):
            raise ValueError(
                f"grid [{self.r_min}, {self.r_max}] must extend 5 beyond the transition [-delta, delta]"
            )


# ---------------------------------------------------------------------------
# finite differences


def derivative_matrices(m: int, h: float):
    """Fourth-order first and second derivative matrices on a uniform grid."""
    d1 = sp.lil_matrix((m, m))
    d2 = sp.lil_matrix((m, m))
    c1 = np.array([1, -8, 0, 8, -1]) / (12 * h)
    c2 = np.array([-1, 16, -30, 16, -1]) / (12 * h**2)
    for i in range(2, m - 2):
        d1[i, i - 2:i + 3] = c1
        d2[i, i - 2:i + 3] = c2
    edge1 = [np.array([-25, 48, -36, 16, -3]) / (12 * h), np.array([-3, -10, 18, -6, 1]) / (12 * h)]
    edge2 = [np.array([45, -154, 214, -156, 61, -10]) / (12 * h**2),
             np.array([10, -15, -4, 14, -6, 1]) / (12 * h**2)]
    for i in (0, 1):
        d1[i, :5] = edge1[i]
        d1[m - 1 - i, m - 5:] = -edge1[i][::-1]
        d2[i, :6] = edge2[i]
        d2[m - 1 - i, m - 6:] = edge2[i][::-1]
    return d1.tocsr(), d2.tocsr()


def _robin_extension(m: int, h: float, kappa_left: float, kappa_right: float):
    """Matrix mapping interior eta values to all m nodes via the Robin closures."""
    ext = sp.lil_matrix((m, m - 2))
    for i in range(1, m - 1):
        ext[i, i - 1] = 1.0
    # one-sided fourth-order eta_r at the end node equated to -+kappa * eta
    coeffs = np.array([48, -36, 16, -3])
    ext[0, 0:4] = coeffs / (25 + 12 * h * kappa_left)
    ext[m - 1, m - 6:m - 2] = coeffs[::-1] / (25 + 12 * h * kappa_right)
    return ext.tocsr()


@dataclass(frozen=True)
class _Background:
    """Quantities fixed for the whole evolution: grid, initial psi, operators."""

    params: ProfileParams
    mode: Mode
    grid: np.ndarray
    psi0: np.ndarray
    psi0_r: np.ndarray
    psi0_rr: np.ndarray
    d1: sp.csr_matrix = field(repr=False)
    d2: sp.csr_matrix = field(repr=False)
    ext: sp.csr_matrix = field(repr=False)
    cap_rates: tuple = (1.0, 1.0)

    @property
    def dr(self) -> float:
        return float(self.grid[1] - self.grid[0])


@dataclass(frozen=True)
class FlowState:
    """Fields at time t on the uniform grid.

    ``phi_values`` is phi, ``log_phi_r`` is log phi_r and ``psi_shift`` is
    psi - psi_0 (psi_0 the initial profile, exact).  Derived quantities are
    exposed as properties.
    """

    t: float
    grid: np.ndarray
    phi_values: np.ndarray
    log_phi_r: np.ndarray
    psi_shift: np.ndarray
    params: ProfileParams
    background: _Background = field(repr=False)

    @property
    def phi_r(self) -> np.ndarray:
        return np.exp(self.log_phi_r)

    @property
    def psi(self) -> np.ndarray:
        return self.background.psi0 + self.psi_shift

    @property
    def psi_r(self) -> np.ndarray:
        return self.background.psi0_r + self.background.d1 @ self.psi_shift

    @property
    def psi_rr(self) -> np.ndarray:
        return self.background.psi0_rr + self.background.d2 @ self.psi_shift

    @property
    def lambda1(self) -> np.ndarray:
        """Ricci eigenvalue psi/phi on the directions orthogonal to the radial one."""
        return self.psi / self.phi_values

    @property
    def lambda2(self) -> np.ndarray:
        """Ricci eigenvalue psi_r/phi_r in the radial direction."""
        return self.psi_r * np.exp(-self.log_phi_r)

    def as_table(self) -> np.ndarray:
        """Columns r, phi, phi_r, psi, psi_r, lambda1, lambda2."""
        return np.column_stack([self.grid, self.phi_values, self.phi_r, self.psi,
                                self.psi_r, self.lambda1, self.lambda2])


def _cap_rates(profile: RadialProfile):
    k, n = profile.params.k, profile.params.n
    if profile.mode is Mode.KNOPF_CONSTANT:
        return float(k), 1.0 / n
    return float(k), float(k)


def init_state(profile: RadialProfile, config: SolverConfig) -> FlowState:
    """Sample the initial profile on the configured grid (t = 0, psi_shift = 0)."""
    config.validate_for(profile.params)
    r = config.grid()
    s = sample(profile, r)
    h = config.dr
    d1, d2 = derivative_matrices(config.m, h)
    rates = _cap_rates(profile)
    background = _Background(
        params=profile.params,
        mode=profile.mode,
        grid=r,
        psi0=s.psi,
        psi0_r=s.psi_r,
        psi0_rr=s.psi_rr,
        d1=d1,
        d2=d2,
        ext=_robin_extension(config.m, h, *rates),
        cap_rates=rates,
    )
    n = profile.params.n
    log_phi_r = s.f - (n - 1) * np.log(s.phi)
    state = FlowState(0.0, r, s.phi, log_phi_r, np.zeros_like(r), profile.params, background)
    _check_invariants(state)
    return state


# ---------------------------------------------------------------------------
# right-hand side and Jacobian


def _pack(state: FlowState) -> np.ndarray:
    return np.concatenate([state.phi_values, state.log_phi_r, state.psi_shift[1:-1]])


def _unpack(y: np.ndarray, bg: _Background, t: float) -> FlowState:
    m = bg.grid.size
    eta = bg.ext @ y[2 * m:]
    return FlowState(t, bg.grid, y[:m].copy(), y[m:2 * m].copy(), eta, bg.params, bg)


def _fields(y, bg):
    m = bg.grid.size
    phi, mu = y[:m], y[m:2 * m]
    eta = bg.ext @ y[2 * m:]
    psi = bg.psi0 + eta
    psi_r = bg.psi0_r + bg.d1 @ eta
    psi_rr = bg.psi0_rr + bg.d2 @ eta
    return phi, mu, psi, psi_r, psi_rr


def _system_rhs(y, bg: _Background) -> np.ndarray:
    n = bg.params.n
    phi, mu, psi, psi_r, psi_rr = _fields(y, bg)
    rho, inv = np.exp(mu), np.exp(-mu)
    drift = n - psi - 2 * (n - 1) * rho / phi
    eta_t = inv * (psi_rr - drift * psi_r) - (n - 1) * rho * psi / phi**2
    return np.concatenate([-psi, -psi_r * inv, eta_t[1:-1]])


def _system_jacobian(y, bg: _Background) -> sp.csc_matrix:
    n = bg.params.n
    m = bg.grid.size
    phi, mu, psi, psi_r, psi_rr = _fields(y, bg)
    rho, inv = np.exp(mu), np.exp(-mu)
    drift = n - psi - 2 * (n - 1) * rho / phi
    ext, d1, d2 = bg.ext, bg.d1, bg.d2
    interior = sp.eye(m, format="csr")[1:-1]
    diag = sp.diags

    dmu_dmu = diag(psi_r * inv)
    dmu_deta = -diag(inv) @ d1 @ ext

    deta_dphi = diag(-2 * (n - 1) * psi_r / phi**2 + 2 * (n - 1) * rho * psi / phi**3)
    deta_dmu = diag(-inv * psi_rr + inv * drift * psi_r + 2 * (n - 1) * psi_r / phi
                    - (n - 1) * rho * psi / phi**2)
    deta_deta = (diag(inv) @ d2 - diag(inv * drift) @ d1
                 + diag(inv * psi_r - (n - 1) * rho / phi**2)) @ ext

    return sp.bmat([
        [None, None, -ext],
        [None, dmu_dmu, dmu_deta],
        [interior @ deta_dphi, interior @ deta_dmu, interior @ deta_deta],
    ], format="csc", dtype=float)


def rhs(state: FlowState) -> np.ndarray:
    """Time derivative of phi at every node, ``phi_t = -psi``."""
    _check_invariants(state)
    return -state.psi


def psi_from_phi(state: FlowState) -> np.ndarray:
    """psi recomputed from the phi fields alone: n - (n-1) phi_r/phi - d/dr log phi_r."""
    n = state.params.n
    return n - (n - 1) * state.phi_r / state.phi_values - state.background.d1 @ state.log_phi_r


def psi_equation_rhs(state: FlowState) -> np.ndarray:
    """Right side of the psi evolution equation, phi_rr/phi_r taken from the mu stencil."""
    n = state.params.n
    bg = state.background
    phi, phi_r = state.phi_values, state.phi_r
    psi, psi_r, psi_rr = state.psi, state.psi_r, state.psi_rr
    phi_rr_over_phi_r = bg.d1 @ state.log_phi_r
    return (psi_rr / phi_r - (phi_rr_over_phi_r / phi_r - (n - 1) / phi) * psi_r
            - (n - 1) * phi_r * psi / phi**2)


# ---------------------------------------------------------------------------
# time stepping


def _check_invariants(state: FlowState):
    for name, values in (("phi", state.phi_values), ("log phi_r", state.log_phi_r),
                         ("psi", state.psi_shift)):
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise FlowInvariantError(f"non-finite {name}", int(bad[0]))
    bad = np.flatnonzero(state.phi_values <= 0)
    if bad.size:
        raise FlowInvariantError("Kähler condition violated: phi <= 0", int(bad[0]))


def _extrapolated_step(y0, dt, bg):
    jac = _system_jacobian(y0, bg)
    eye = sp.identity(y0.size, format="csc")
    f0 = _system_rhs(y0, bg)
    table = []
    for j, substeps in enumerate(_EXTRAPOLATION_SEQUENCE):
        h = dt / substeps
        lu = splu((eye - h * jac).tocsc())
        y = y0 + lu.solve(h * f0)
        for _ in range(substeps - 1):
            y = y + lu.solve(h * _system_rhs(y, bg))
        row = [y]
        for k in range(1, j + 1):
            ratio = substeps / _EXTRAPOLATION_SEQUENCE[j - k]
            row.append(row[k - 1] + (row[k - 1] - table[j - 1][k - 1]) / (ratio - 1))
        table.append(row)
    return table[-1][-1]


def step(state: FlowState, dt: float) -> FlowState:
    """Advance by one extrapolated linearly-implicit Euler step of size dt."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return state
    bg = state.background
    y = _extrapolated_step(_pack(state), dt, bg)
    new = _unpack(y, bg, state.t + dt)
    _check_invariants(new)
    return new


def max_step(state: FlowState, config: SolverConfig) -> float:
    """Largest step taken by :func:`evolve`.

    ``cfl_safety * dr**2 * phi_r`` at the node of largest phi_r, i.e. the
    explicit parabolic limit of the well-resolved middle of the grid.  The
    implicit scheme is stable beyond this; the bound only controls accuracy.
    """
    return config.cfl_safety * config.dr**2 * float(np.max(state.phi_r))


def evolve(state: FlowState, config: SolverConfig, dt: float | None = None) -> list[FlowState]:
    """Integrate to ``config.t_end`` and return snapshots at the requested times.

    The snapshot set is ``config.snapshot_times`` together with ``t_end``.
    Steps are uniform between consecutive snapshots, no larger than ``dt``
    (default :func:`max_step`).
    """
    dt_max = max_step(state, config) if dt is None else dt
    times = sorted(set(config.snapshot_times) | {config.t_end})
    snapshots = []
    current = state
    for target in times:
        span = target - current.t
        if span > 0:
            steps = max(1, int(np.ceil(span / dt_max - 1e-9)))
            h = span / steps
            for _ in range(steps):
                current = step(current, h)
            current = replace(current, t=target)
        log.debug("snapshot t=%g", target)
        snapshots.append(current)
    return snapshots


def psi_equation_residual(snapshots: list[FlowState]) -> dict:
    """Residual of the psi evolution equation along equally spaced snapshots.

    psi_t is taken by central differences in time at each interior snapshot
    and compared with :func:`psi_equation_rhs`.  Returns the per-node
    residual fields and their overall max.
    """
    if len(snapshots) < 3:
        raise ValueError("need at least three snapshots")
    fields = []
    for prev, mid, nxt in zip(snapshots, snapshots[1:], snapshots[2:]):
        span = nxt.t - prev.t
        psi_t = (nxt.psi_shift - prev.psi_shift) / span
        fields.append(psi_t - psi_equation_rhs(mid))
    return {"fields": fields, "max": float(max(np.max(np.abs(f)) for f in fields))}


def analytic_dt_psi_r(profile: RadialProfile, r) -> np.ndarray:
    """Initial rate of change of psi_r on the ray r <= -delta.

    Equals ``(n-1)(n-k) e^{kr} (e^{kr} - k c) / phi^(2n+1)``; for k = 1 this is
    ``(n-1)^2 e^r (e^r - c) / phi^(2n+1)``, negative exactly for r < log c.
    """
    r = np.asarray(r, dtype=float)
    p = profile.params
    if profile.mode is Mode.PAPER_SMOOTHED and np.any(r > -p.delta):
        raise ValueError("formula holds only where the slope is constant, r <= -delta")
    n, k, c = p.n, p.k, p.c
    phi = sample(profile, r).phi
    ekr = np.exp(k * r)
    return (n - 1) * (n - k) * ekr * (ekr - k * c) / phi ** (2 * n + 1)


def sign_threshold(params: ProfileParams) -> float:
    """r below which the initial d/dt psi_r is negative: log(k c) / k."""
    return float(np.log(params.k * params.c) / params.k)
