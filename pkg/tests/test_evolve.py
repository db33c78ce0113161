import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from bnhqc import evolve as ev
from bnhqc import pulses as pl
from bnhqc import spinsys as ss
from conftest import random_density

PI = math.pi
OMEGA = 2 * PI * 12.5
SX = np.array([[0, 1], [1, 0]], complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def ramp_oracle(om, slope, tau):
    """Closed form for H = (Om/2)(e^{i k t}|b><a| + h.c.): U = W(t) exp(-i[(Om/2)sx + (k/2)sz] t)."""
    w = np.diag([np.exp(0.5j * slope * tau), np.exp(-0.5j * slope * tau)])
    return w @ scipy.linalg.expm(-1j * tau * (0.5 * om * SX + 0.5 * slope * SZ))


@given(st.floats(0.05, 2 * PI - 0.05), st.floats(0, PI), st.floats(-PI, PI))
def test_bnhqc_pair_propagator_matches_closed_form(g, theta, phi):
    s = pl.make_bnhqc(g, theta, phi, OMEGA)
    u = ev.propagate_unitary(s, 2).final
    ref = ramp_oracle(OMEGA, s.segments[0].phase.rate, s.duration)
    assert np.max(np.abs(u - ref)) < 1e-10
    # cyclic: bright state picks up exactly e^{i gamma}
    assert abs(u[0, 0] - np.exp(1j * g)) < 1e-10 and abs(u[1, 0]) < 1e-10


@given(st.floats(-3 * OMEGA, 3 * OMEGA), st.floats(0.005, 0.1))
def test_linear_ramp_matches_closed_form(slope, tau):
    s = pl.linear_ramp_schedule(1.0, 0.3, 0.1, OMEGA, slope, tau)
    u = ev.schedule_unitary(s, 2, ev.StepPolicy(0.02))
    assert np.max(np.abs(u - ramp_oracle(OMEGA, slope, tau))) < 1e-9


def test_nhqc_constant_envelope_closed_form():
    g = 0.9
    s = pl.make_nhqc(g, 0.2, 0.1, pl.Envelope("constant", 80.0))
    u = ev.propagate_unitary(s, 2).final
    h1 = 0.5 * 80.0 * SX
    ph = PI + g
    h2 = 0.5 * 80.0 * np.array([[0, np.exp(1j * ph)], [np.exp(-1j * ph), 0]])
    t = s.duration / 2
    ref = scipy.linalg.expm(-1j * t * h2) @ scipy.linalg.expm(-1j * t * h1)
    assert np.max(np.abs(u - ref)) < 1e-12


@pytest.mark.parametrize("dims", [2, 3])
def test_unitarity_along_path(dims):
    s = pl.make_nhqc(1.2, 0.7, 0.4, pl.Envelope("gaussian", 2 * PI * 12.76))
    tr = ev.propagate_unitary(s, dims)
    eye = np.eye(dims)
    err = np.max(np.abs(np.einsum("nji,njk->nik", tr.states.conj(), tr.states) - eye))
    assert err < 1e-12


def test_propagator_composition():
    om, slope, tau = OMEGA, -120.0, 0.06
    h = lambda t: ev.schedule_hamiltonians(pl.linear_ramp_schedule(1, 0.4, 0.2, om, slope, 1.0), t, 3)
    full = ev.propagate_hamiltonian(h, 0.0, tau, 400)
    a = ev.propagate_hamiltonian(h, 0.0, 0.025, 400)
    b = ev.propagate_hamiltonian(h, 0.025, tau, 400)
    assert np.max(np.abs(full - b @ a)) < 1e-9


def test_magnus_orders_converge():
    s = pl.make_nhqc(0.8, 0.3, 0, pl.Envelope("gaussian", 80.0))
    ref = ev.schedule_unitary(s, 3, ev.StepPolicy(0.001, 4))
    e2 = np.abs(ev.schedule_unitary(s, 3, ev.StepPolicy(0.01, 2)) - ref).max()
    e4 = np.abs(ev.schedule_unitary(s, 3, ev.StepPolicy(0.01, 4)) - ref).max()
    assert e4 < e2 and e4 < 1e-9


def test_lab_and_rotating_frames_agree():
    p = ss.SpinSystemParams()
    w1, w2 = p.transition_frequencies()
    tones = ss.drive_tones(p, 2 * PI * 12.5, 2 * PI * 10.0, 0.4, -0.8)
    lab = lambda ts: np.stack([ss.electron_hamiltonian_lab(p, tones, t) for t in ts])
    rot = lambda ts: np.stack([ss.rotating_frame(p, tones, t, w1, w2, rwa=False) for t in ts])
    T, n = 0.004, 40000
    u_lab = ev.propagate_hamiltonian(lab, 0.0, T, n)
    u_rot = ev.propagate_hamiltonian(rot, 0.0, T, n)
    v = ss.frame_operator(T, w1, w2)
    assert np.max(np.abs(v.conj().T @ u_lab - u_rot)) < 1e-8


def test_step_policy_limits():
    with pytest.raises(ValueError):
        ev.StepPolicy(0.06)
    with pytest.raises(ValueError):
        ev.StepPolicy(0.0)
    with pytest.raises(ValueError):
        ev.StepPolicy(0.01, 3)


def test_qubit_block_and_leakage_for_gate():
    s = pl.make_bnhqc(PI / 2, PI / 2, 0, OMEGA)
    tr = ev.propagate_unitary(s, 3)
    assert tr.leakage_final < 1e-12
    blk = ev.qubit_block(tr.final, 3)
    assert np.allclose(blk.conj().T @ blk, np.eye(2), atol=1e-11)
    half = ev.propagate_unitary(pl.truncate(s, s.duration / 2), 3)
    assert half.leakage_final > 0.1


def test_dephase_idle_closed_form():
    rho = np.full((3, 3), 1 / 3, complex)
    out = ev.dephase_idle(rho, 2.0, ev.NoiseModel(dephasing_rate_e=0.1), 3)
    # L = sqrt(G) S_z: coherence (m, m') decays at G (m - m')^2 / 2
    assert math.isclose(out[0, 2].real, math.exp(-2 * 0.1 * 2.0) / 3, rel_tol=1e-13)
    assert math.isclose(out[0, 1].real, math.exp(-0.5 * 0.1 * 2.0) / 3, rel_tol=1e-13)
    assert np.allclose(np.diag(out), np.diag(rho))


def test_master_equation_matches_dephase_idle_without_drive():
    s = pl.PulseSchedule((pl.Segment(3.0, pl.Envelope("constant", 0.0)),), 0.0, 0.0, 0.0, "custom")
    rho = random_density(np.random.default_rng(3), 3)
    noise = ev.NoiseModel(dephasing_rate_e=0.2)
    out = ev.propagate_master(rho, s, noise, 3).final
    assert np.allclose(out, ev.dephase_idle(rho, 3.0, noise, 3), atol=1e-12)


def test_master_equation_is_physical_and_reduces_to_unitary():
    rng = np.random.default_rng(4)
    rho = random_density(rng, 3)
    s = pl.make_bnhqc(PI / 3, 1.0, 0.2, OMEGA)
    u = ev.schedule_unitary(s, 3)
    clean = ev.propagate_master(rho, s, ev.NoiseModel(), 3).final
    assert np.allclose(clean, u @ rho @ u.conj().T, atol=1e-10)
    tr = ev.propagate_master(rho, s, ev.NoiseModel(dephasing_rate_e=5.0), 3)
    traces = np.einsum("nii->n", tr.states).real
    assert np.max(np.abs(traces - 1)) < 1e-10
    assert min(np.linalg.eigvalsh(r).min() for r in tr.states) > -1e-10


def test_validate_density_rejects():
    with pytest.raises(ValueError):
        ev.validate_density(np.diag([1.0, 1.0]))
    with pytest.raises(ValueError):
        ev.validate_density(np.diag([1.5, -0.5]))


@given(st.integers(0, 2**31), st.floats(0, 1))
def test_depolarize_trace_and_limit(seed, p):
    rho = random_density(np.random.default_rng(seed), 4)
    out = ev.depolarize(rho, p)
    assert math.isclose(np.trace(out).real, 1.0, rel_tol=1e-12)
    assert np.linalg.eigvalsh(out).min() > -1e-12


def test_shot_rng_is_order_free():
    a = [ev.shot_rng(7, k).normal() for k in range(5)]
    b = [ev.shot_rng(7, k).normal() for k in reversed(range(5))][::-1]
    assert a == b and len(set(a)) == 5


def test_monte_carlo_thread_determinism():
    s = pl.make_bnhqc(PI / 4, PI / 2, 0, OMEGA)
    noise = ev.NoiseModel(detuning_sigma=2 * PI * 0.5, amplitude_rel_sigma=0.01)
    r1 = ev.monte_carlo(s, noise, 24, 99, threads=1)
    r4 = ev.monte_carlo(s, noise, 24, 99, threads=4)
    assert np.array_equal(r1.fidelities, r4.fidelities)
    assert np.array_equal(r1.superop, r4.superop)
    assert 0.9 < r1.fidelity_mean < 1.0 and r1.fidelity_var > 0


def test_monte_carlo_noiseless_is_exact():
    s = pl.make_bnhqc(PI / 4, PI / 2, 0, OMEGA)
    r = ev.monte_carlo(s, ev.NoiseModel(), 3, 0)
    assert np.allclose(r.fidelities, 1.0, atol=1e-12)


def test_hybrid_without_drive_is_identity():
    assert np.array_equal(ev.propagate_hybrid(ss.SpinSystemParams(), []), np.eye(9))
