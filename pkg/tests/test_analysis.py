import numpy as np
import pytest

from kahlerflow import analysis, flow
from kahlerflow.profile import ProfileParams, build_profile

GRID = np.linspace(-40, 40, 4096)


def test_default_certificate(default_profile):
    cert = analysis.certify_initial(default_profile, GRID)
    assert cert.all_true
    assert cert.witnesses["psi_positive"][1] == 1.0
    assert cert.witnesses["psi_positive"][0] <= -1
    assert cert.witnesses["psi_r_nonnegative"][1] == 0.0


def test_knopf_pattern(knopf_profile):
    cert = analysis.certify_initial(knopf_profile, GRID)
    assert cert.pattern() == (True, True, True, True, True, False)


def test_twisted_pointwise_conditions():
    cert = analysis.certify_initial(build_profile(ProfileParams(n=4, k=3)), GRID)
    assert cert.pattern()[:4] == (True, True, True, True)
    assert cert.witnesses["psi_positive"][1] == 1.0


def test_certificate_grid_must_span(default_profile):
    with pytest.raises(ValueError):
        analysis.certify_initial(default_profile, np.linspace(-10, 10, 100))


def test_initial_locus_empty(default_run):
    _, snaps = default_run
    report = analysis.detect_mixed_sign(snaps[:1])[0]
    assert report.t == 0 and not report.mixed


def test_mixed_sign_at_1e3(default_run):
    config, snaps = default_run
    report = analysis.detect_mixed_sign(snaps)[-1]
    assert report.mixed
    assert report.predicted_threshold == 0.0
    assert report.locus_within(report.predicted_threshold + config.dr)
    assert report.min_lambda2[0] < -39


def test_first_order_prediction(default_run, default_profile):
    _, snaps = default_run
    end = snaps[-1]
    predicted = analysis.first_order_lambda2(default_profile, snaps[0], end.t)
    i = np.argmin(np.abs(end.grid + 10))
    assert end.lambda2[i] == pytest.approx(predicted[i], rel=0.05)


def test_locus_nonempty_along_decreasing_times(default_run):
    _, snaps = default_run
    for report in analysis.detect_mixed_sign(snaps[1:]):
        assert report.mixed


def test_locus_monotone_on_the_ray(default_run):
    """Away from the transition the negative set only grows in time.

    Next to r = -delta it does not: the smoothed transition feeds positive
    psi_r leftward and the edge of the locus recedes slightly (reported, not
    asserted as monotone).
    """
    config, snaps = default_run
    delta = 1.0
    sel = snaps[0].grid <= -2 * delta
    previous = np.zeros(sel.sum(), dtype=bool)
    for snap in snaps[1:]:
        current = snap.lambda2[sel] < -1e-12
        assert np.all(current >= previous)
        previous = current
    edges = [r.negative_locus.max() for r in analysis.detect_mixed_sign(snaps[1:])]
    assert all(-1.2 < e < -0.9 for e in edges)


@pytest.mark.parametrize("n", [2, 3])
def test_rate_comparison(n):
    result = analysis.compare_dt_psi_r(build_profile(ProfileParams(n=n)))
    assert result.max_relative_error <= 1e-2
    assert result.r[0] >= -20 and result.r[-1] <= -2
    assert result.sign_changes.size == 0


def test_rate_sign_change_at_log_c():
    config = flow.SolverConfig()
    result = analysis.compare_dt_psi_r(build_profile(ProfileParams(c=np.exp(-5))), config)
    assert result.sign_changes.size == 1
    assert abs(result.sign_changes[0] + 5) <= config.dr


def test_rate_step_pair_checked(default_profile):
    with pytest.raises(ValueError):
        analysis.compare_dt_psi_r(default_profile, steps=(1e-5, 4e-6))
