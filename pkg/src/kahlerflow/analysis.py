"""Certification of initial data and detection of mixed Ricci sign along the flow."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .calabi import ExtensionVerdict, check_extension
from .flow import (FlowState, SolverConfig, analytic_dt_psi_r, evolve, init_state,
                   sign_threshold)
from .profile import Mode, RadialProfile, sample

__all__ = [
    "CONDITIONS",
    "Certificate",
    "MixedSignReport",
    "RateComparison",
    "certify_initial",
    "detect_mixed_sign",
    "compare_dt_psi_r",
]

CONDITIONS = (
    "phi_positive",
    "phi_r_positive",
    "psi_positive",
    "psi_r_nonnegative",
    "extends_at_zero",
    "extends_at_infinity",
)


@dataclass(frozen=True)
class Certificate:
    """Boolean verdict per condition; ``witnesses`` maps each to an extremal (r, value).

    For the two extension conditions the witness is the fitted pair of leading
    coefficients instead of a grid node.
    """

    conditions: dict
    witnesses: dict
    extension: ExtensionVerdict

    @property
    def all_true(self) -> bool:
        return all(self.conditions.values())

    def pattern(self) -> tuple:
        return tuple(self.conditions[name] for name in CONDITIONS)


def _ray_checks(profile: RadialProfile) -> dict:
    """Conditions on the rays |r| >= delta from the closed forms.

    There ``a = +-1`` so ``psi = n -+ k`` and ``psi_r = 0``, while
    ``phi^(n-1) phi_r = e^f > 0`` and ``phi^n = n F + c > 0``.  Everything
    reduces to inequalities on the parameters.
    """
    p = profile.params
    positive_cap = p.c > 0
    return {
        "phi_positive": positive_cap,
        "phi_r_positive": positive_cap,
        "psi_positive": p.n - p.k > 0,
        "psi_r_nonnegative": True,
    }


def certify_initial(profile: RadialProfile, grid) -> Certificate:
    grid = np.asarray(grid, dtype=float)
    if grid.min() > -40 or grid.max() < 40:
        raise ValueError("certification grid must span at least [-40, 40]")
    s = sample(profile, grid)
    rays = _ray_checks(profile)
    fields = {
        "phi_positive": (s.phi, lambda v: v > 0),
        "phi_r_positive": (s.phi_r, lambda v: v > 0),
        "psi_positive": (s.psi, lambda v: v > 0),
        "psi_r_nonnegative": (s.psi_r, lambda v: v >= 0),
    }
    conditions, witnesses = {}, {}
    for name, (values, holds) in fields.items():
        i = int(np.argmin(values))
        conditions[name] = bool(np.all(holds(values)) and rays[name])
        witnesses[name] = (float(grid[i]), float(values[i]))
    verdict = check_extension(profile)
    zero, inf = verdict.witnesses
    conditions["extends_at_zero"] = verdict.extends_at_zero
    conditions["extends_at_infinity"] = verdict.extends_at_infinity
    witnesses["extends_at_zero"] = zero.coefficients[:2]
    witnesses["extends_at_infinity"] = inf.coefficients[:2]
    return Certificate(conditions, witnesses, verdict)


@dataclass(frozen=True)
class MixedSignReport:
    """Where the radial Ricci eigenvalue is negative at one snapshot."""

    t: float
    negative_locus: np.ndarray
    min_lambda2: tuple
    predicted_threshold: float

    @property
    def mixed(self) -> bool:
        return self.negative_locus.size > 0

    def locus_within(self, bound: float) -> bool:
        return bool(np.all(self.negative_locus < bound))


def detect_mixed_sign(snapshots, tol: float = 1e-12) -> list[MixedSignReport]:
    reports = []
    for snap in snapshots:
        lam2 = snap.lambda2
        i = int(np.argmin(lam2))
        reports.append(MixedSignReport(
            t=snap.t,
            negative_locus=snap.grid[lam2 < -tol],
            min_lambda2=(float(snap.grid[i]), float(lam2[i])),
            predicted_threshold=sign_threshold(snap.params),
        ))
    return reports


@dataclass(frozen=True)
class RateComparison:
    """Numerical vs closed-form initial d/dt psi_r on a window of the left ray."""

    r: np.ndarray
    numerical: np.ndarray
    analytic: np.ndarray
    max_relative_error: float
    mean_relative_error: float
    sign_changes: np.ndarray


def compare_dt_psi_r(profile: RadialProfile, config: SolverConfig | None = None,
                     steps=(1e-5, 5e-6), window=None) -> RateComparison:
    """Richardson-extrapolated d/dt psi_r at t = 0 against :func:`analytic_dt_psi_r`.

    Two short evolutions of lengths ``steps`` give forward differences ``D``;
    ``2 D(tau/2) - D(tau)`` removes the O(tau) term.  ``sign_changes`` lists
    the midpoints between nodes where the numerical rate changes sign.
    """
    config = config or SolverConfig()
    tau, half = steps
    if not np.isclose(half, tau / 2):
        raise ValueError("steps must be (tau, tau / 2)")
    lo, hi = window if window is not None else (-20.0, -2 * profile.params.delta)
    state = init_state(profile, replace(config, t_end=0.0, snapshot_times=()))
    rates = []
    for length in (tau, half):
        run = replace(config, t_end=length, snapshot_times=())
        end = evolve(state, run)[-1]
        rates.append((end.psi_r - state.psi_r) / length)
    numerical = 2 * rates[1] - rates[0]
    sel = (state.grid >= lo) & (state.grid <= hi)
    r = state.grid[sel]
    num = numerical[sel]
    exact = analytic_dt_psi_r(profile, r)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(num - exact) / np.abs(exact)
    flips = np.flatnonzero(np.sign(num[:-1]) != np.sign(num[1:]))
    return RateComparison(
        r=r,
        numerical=num,
        analytic=exact,
        max_relative_error=float(np.max(rel)),
        mean_relative_error=float(np.mean(rel)),
        sign_changes=(r[flips] + r[flips + 1]) / 2,
    )


def first_order_lambda2(profile: RadialProfile, state: FlowState, t: float) -> np.ndarray:
    """Linear-in-t prediction of lambda2 on the left ray: t * d/dt psi_r / phi_r."""
    p = profile.params
    r = state.grid
    sel = r <= -p.delta if profile.mode is Mode.PAPER_SMOOTHED else np.ones_like(r, dtype=bool)
    out = np.full_like(r, np.nan)
    out[sel] = t * analytic_dt_psi_r(profile, r[sel]) / state.phi_r[sel]
    return out
