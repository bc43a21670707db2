from dataclasses import replace

import numpy as np
import pytest

from kahlerflow import flow
from kahlerflow.profile import Mode, ProfileParams, build_profile, sample


@pytest.fixture(scope="module")
def initial(default_profile):
    return flow.init_state(default_profile, flow.SolverConfig())


@pytest.mark.parametrize("kwargs", [dict(m=255), dict(m=1000.5), dict(r_min=5.0, r_max=1.0),
                                    dict(cfl_safety=0.0), dict(cfl_safety=1.5),
                                    dict(t_end=0.2), dict(t_end=-1.0),
                                    dict(t_end=1e-3, snapshot_times=(2e-3,))])
def test_config_rejected(kwargs):
    with pytest.raises(ValueError):
        flow.SolverConfig(**kwargs)


def test_config_must_contain_transition(default_profile):
    with pytest.raises(ValueError):
        flow.init_state(default_profile, flow.SolverConfig(r_min=-5.5))
    with pytest.raises(ValueError):
        flow.init_state(build_profile(ProfileParams(delta=36.0)), flow.SolverConfig())


def test_initial_state(initial):
    assert initial.t == 0
    assert initial.phi_values[0] == pytest.approx(np.sqrt(2 * np.exp(-40) + 1), rel=1e-16)
    assert initial.grid.size == 4096
    assert np.all(initial.phi_r > 0)
    assert np.all(initial.psi_r >= -1e-10)
    left = initial.grid <= -1
    assert np.all(initial.psi[left] == 1)


def test_discrete_psi_from_phi_fourth_order(default_profile):
    """psi rebuilt from phi by stencils approaches n - k a at fourth order."""
    errors, ray_errors = [], []
    for m in (1025, 2049):
        state = flow.init_state(default_profile, flow.SolverConfig(m=m))
        exact = sample(default_profile, state.grid).psi
        rebuilt = flow.psi_from_phi(state)
        errors.append(np.max(np.abs(rebuilt - exact)))
        ray_errors.append(np.max(np.abs(rebuilt[state.grid <= -1] - 1)))
    assert 12 < errors[0] / errors[1] < 20
    assert 12 < ray_errors[0] / ray_errors[1] < 20
    assert ray_errors[1] < 1e-8


def test_rhs_at_t0(initial, default_profile):
    r = initial.grid
    rate = flow.rhs(initial)
    assert np.all(rate[r <= -1] == -1.0)
    assert np.all(rate[r >= 1] == -3.0)
    np.testing.assert_allclose(rate, -(2 - sample(default_profile, r).a), atol=1e-15)


def test_rhs_rejects_broken_state(initial):
    phi = initial.phi_values.copy()
    phi[17] = -1.0
    with pytest.raises(flow.FlowInvariantError) as info:
        flow.rhs(replace(initial, phi_values=phi))
    assert info.value.node == 17
    mu = initial.log_phi_r.copy()
    mu[5] = np.nan
    with pytest.raises(flow.FlowInvariantError):
        flow.rhs(replace(initial, log_phi_r=mu))


def test_zero_step_is_identity(initial):
    assert flow.step(initial, 0.0) is initial
    with pytest.raises(ValueError):
        flow.step(initial, -1e-6)


def test_local_error_order(default_profile):
    """One step against two half steps: difference shrinks like dt^5."""
    config = flow.SolverConfig(m=1024, t_end=1e-4)
    start = flow.evolve(flow.init_state(default_profile, config), config)[-1]
    diffs = []
    for dt in (1e-5, 5e-6):
        one = flow.step(start, dt)
        two = flow.step(flow.step(start, dt / 2), dt / 2)
        diffs.append(np.max(np.abs(one.psi_shift - two.psi_shift)))
    assert diffs[0] / diffs[1] > 25


def test_global_time_order(default_profile):
    config = flow.SolverConfig(m=512, t_end=0.05)
    state = flow.init_state(default_profile, config)
    runs = [flow.evolve(state, config, dt=0.05 / 2**j)[-1] for j in (3, 4, 5)]
    values = [np.r_[s.phi_values, s.psi] for s in runs]
    d1 = np.max(np.abs(values[0] - values[1]))
    d2 = np.max(np.abs(values[1] - values[2]))
    assert d1 / d2 > 4


def test_cap_decreases_at_unit_rate(default_run):
    config, snaps = default_run
    first, last = snaps[0], snaps[-1]
    i = np.argmin(np.abs(first.grid + 20))
    assert first.phi_values[i] - last.phi_values[i] == pytest.approx(1e-3, rel=1e-6)


def test_evolve_zero_time(initial):
    snaps = flow.evolve(initial, flow.SolverConfig(t_end=0.0))
    assert len(snaps) == 1 and snaps[0] is initial


def test_snapshot_times(default_run):
    _, snaps = default_run
    assert [s.t for s in snaps] == [0.0, 2.5e-4, 5e-4, 1e-3]
    for s in snaps:
        assert s.psi.shape == s.psi_r.shape == s.grid.shape


def test_spatial_self_convergence(default_profile):
    values = []
    for m in (1025, 2049, 4097):
        config = flow.SolverConfig(m=m)
        end = flow.evolve(flow.init_state(default_profile, config), config)[-1]
        i = np.flatnonzero(np.isclose(end.grid, -5.0))[0]
        values.append((end.phi_values[i], end.psi[i], end.lambda2[i]))
    values = np.array(values)
    d = np.abs(np.diff(values, axis=0))
    # phi(-5) is already converged to rounding at m = 1025; the derived
    # fields carry the fourth-order signal
    assert np.all(d[:, 0] < 1e-13)
    for column in (1, 2):
        assert 12 < d[0, column] / d[1, column] < 20


def test_domain_insensitivity(default_profile):
    def run(r_min, m):
        config = flow.SolverConfig(r_min=r_min, m=m)
        end = flow.evolve(flow.init_state(default_profile, config), config)[-1]
        sel = (end.grid >= -20 - 1e-9) & (end.grid <= 20 + 1e-9)
        return end.grid[sel], end.phi_values[sel], end.lambda2[sel]

    r_a, phi_a, lam_a = run(-40.0, 4001)
    r_b, phi_b, lam_b = run(-60.0, 5001)
    np.testing.assert_allclose(r_a, r_b, atol=1e-12)
    assert np.max(np.abs(phi_a - phi_b)) <= 1e-10
    assert np.max(np.abs(lam_a - lam_b)) <= 1e-10


def test_kahler_condition_to_1e2(default_profile):
    config = flow.SolverConfig(t_end=1e-2)
    end = flow.evolve(flow.init_state(default_profile, config), config)[-1]
    assert np.all(end.phi_values > 0)
    assert np.all(np.isfinite(end.log_phi_r)) and np.all(end.phi_r > 0)
    # phi itself is increasing wherever double precision resolves it
    d_phi = np.diff(end.phi_values)
    assert np.all(d_phi >= 0)
    assert np.all(d_phi[np.abs(end.grid[1:]) < 15] > 0)


@pytest.mark.parametrize("mode", list(Mode))
def test_psi_residual_converges(mode):
    profile = build_profile(ProfileParams(), mode=mode)
    maxima = []
    for tau, m in ((2e-4, 1025), (1e-4, 2049), (5e-5, 4097)):
        t0 = 1e-3
        config = flow.SolverConfig(m=m, t_end=t0 + tau, snapshot_times=(t0 - tau, t0))
        snaps = flow.evolve(flow.init_state(profile, config), config)
        maxima.append(flow.psi_equation_residual(snaps)["max"])
    assert maxima[0] > maxima[1] > maxima[2]
    assert 3.5 < maxima[1] / maxima[2] < 4.5


def test_psi_residual_needs_three(initial):
    with pytest.raises(ValueError):
        flow.psi_equation_residual([initial, initial])


@pytest.mark.parametrize("n", [2, 3])
def test_psi_equation_at_t0(n):
    profile = build_profile(ProfileParams(n=n))
    state = flow.init_state(profile, flow.SolverConfig())
    left = state.grid <= -1
    expected = -(n - 1) ** 2 * state.phi_r / state.phi_values**2
    np.testing.assert_allclose(flow.psi_equation_rhs(state)[left], expected[left], rtol=1e-10, atol=0)


def test_analytic_rate_examples(default_profile):
    e5 = np.exp(-5)
    assert flow.analytic_dt_psi_r(default_profile, -5.0) == pytest.approx(
        e5 * (e5 - 1) / (2 * e5 + 1) ** 2.5, rel=1e-14)
    p3 = build_profile(ProfileParams(n=3))
    assert flow.analytic_dt_psi_r(p3, -5.0) == pytest.approx(
        4 * e5 * (e5 - 1) / (3 * e5 + 1) ** (7 / 3), rel=1e-14)
    pc = build_profile(ProfileParams(c=np.exp(-3)))
    assert flow.analytic_dt_psi_r(pc, -3.0) == pytest.approx(0.0, abs=1e-18)
    r = np.linspace(-30, -1, 300)
    signs = np.sign(flow.analytic_dt_psi_r(pc, r))
    assert np.all(signs[r < -3] < 0) and np.all(signs[r > -3] > 0)
    with pytest.raises(ValueError):
        flow.analytic_dt_psi_r(default_profile, -0.5)


def test_twisted_threshold():
    p = build_profile(ProfileParams(n=4, k=2, c=np.exp(-8)))
    thr = flow.sign_threshold(p.params)
    assert thr == pytest.approx(np.log(2 * np.exp(-8)) / 2)
    assert flow.analytic_dt_psi_r(p, thr) == pytest.approx(0.0, abs=1e-20)


def test_table_layout(default_run):
    _, snaps = default_run
    table = snaps[-1].as_table()
    assert table.shape == (4096, 7)
    assert np.all(np.isfinite(table))
    np.testing.assert_allclose(table[:, 5], snaps[-1].psi / snaps[-1].phi_values)


def test_derivative_matrices_exact_on_quartics():
    m, h = 40, 0.1
    x = np.arange(m) * h
    d1, d2 = flow.derivative_matrices(m, h)
    p = 1 + x - 2 * x**2 + 0.5 * x**3 - 0.1 * x**4
    np.testing.assert_allclose(d1 @ p, 1 - 4 * x + 1.5 * x**2 - 0.4 * x**3, atol=1e-10)
    np.testing.assert_allclose(d2 @ p, -4 + 3 * x - 1.2 * x**2, atol=1e-9)
