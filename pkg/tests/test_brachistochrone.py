import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bnhqc import brachistochrone as br
from bnhqc import pulses as pl

PI = math.pi
OMEGA = 2 * PI * 12.5


@given(st.floats(0.05, 2 * PI - 0.05), st.floats(0, PI), st.floats(-PI, PI))
def test_bnhqc_satisfies_constraints(g, theta, phi):
    r = br.constraint_residuals(pl.make_bnhqc(g, theta, phi, OMEGA))
    assert r.f1_residual < 1e-12 and r.f2_residual < 1e-12


@pytest.mark.parametrize("g", [PI / 8, PI / 4, PI / 2, 3 * PI / 4, PI, 3 * PI / 2])
def test_qbe_multiplier_is_analytic(g):
    w = br.qbe_residual(pl.make_bnhqc(g, PI / 2, 0, OMEGA))
    assert w.residual < 1e-12
    assert w.lambda1 == 1.0
    assert abs(w.lambda2 - br.qbe_lambda2_analytic(g)) < 1e-9


@given(st.floats(0.1, 2 * PI - 0.1), st.floats(0.2, 5.0))
def test_qbe_residual_time_rescale_invariant(g, c):
    a = br.qbe_residual(pl.make_bnhqc(g, 0, 0, OMEGA), n_per_segment=16)
    b = br.qbe_residual(pl.make_bnhqc(g, 0, 0, c * OMEGA), n_per_segment=16)
    assert abs(a.lambda2 - b.lambda2) < 1e-8 and b.residual < 1e-12


def test_gaussian_nhqc_is_not_a_brachistochrone():
    s = pl.make_nhqc(PI / 4, 0, 0, pl.Envelope("gaussian", 2 * PI * 12.76))
    assert br.qbe_residual(s).residual > 0.1


def test_identity_schedule_trivially_passes():
    s = pl.identity_schedule()
    assert br.qbe_residual(s).residual == 0.0
    assert br.constraint_residuals(s) == br.ConstraintReport(0.0, 0.0)


def test_unsupported_phase_program():
    seg = pl.Segment(0.05, pl.Envelope("constant", OMEGA), pl.PhaseProgram("chirp", 10.0, 0.0))
    with pytest.raises(br.UnsupportedShape):
        br.qbe_residual(pl.PulseSchedule((seg,), 0.0, 0.0, 1.0, "custom"))


def test_scan_finds_tau_min_for_single_gamma():
    g = PI / 2
    est = pl.tau_min(g, OMEGA)
    taus = np.arange(0.6 * est, 1.3 * est, 0.0005)
    slopes = np.linspace(-2.5 * OMEGA, 2.5 * OMEGA, 41)
    r = br.optimality_scan(g, OMEGA, slopes, taus)
    assert abs(r.tau_star - est) < 0.0005
    assert r.infidelity_star <= 1e-6 * (1 + 1e-6)
    assert abs(r.slope_star - 2 * (g - PI) / est) < 0.05 * OMEGA
    lines = r.to_csv().splitlines()
    assert lines[0] == "slope,duration_us,infidelity" and len(lines) == 1 + len(taus) * len(slopes)


def test_scan_threads_match():
    g = PI
    est = pl.tau_min(g, OMEGA)
    taus = np.arange(0.8 * est, 1.2 * est, 0.001)
    slopes = np.linspace(-OMEGA, OMEGA, 11)
    a = br.optimality_scan(g, OMEGA, slopes, taus)
    b = br.optimality_scan(g, OMEGA, slopes, taus, threads=3)
    assert np.array_equal(a.infidelity, b.infidelity) and a.tau_star == b.tau_star


def test_scan_argument_checks():
    with pytest.raises(ValueError):
        br.optimality_scan(1.0, OMEGA, [], [0.1])
    with pytest.raises(ValueError):
        br.optimality_scan(1.0, OMEGA, [0.0], [0.1], epsilon=0.1)
    with pytest.raises(ValueError):
        br.optimality_scan(1.0, OMEGA, [0.0], [-0.1])


def test_scan_without_hit_reports_nan():
    r = br.optimality_scan(PI / 2, OMEGA, np.linspace(-10, 10, 3), np.linspace(0.001, 0.01, 5))
    assert math.isnan(r.tau_star)
