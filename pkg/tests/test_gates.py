import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bnhqc import evolve as ev
from bnhqc import gates as gt
from bnhqc import spinsys as ss

PI = math.pi
SIG = [np.array([[0, 1], [1, 0]], complex), np.array([[0, -1j], [1j, 0]], complex), np.diag([1.0, -1.0]).astype(complex)]


def bright_target(g, theta, phi):
    """|d><d| + e^{i g}|b><b| with bright state (e^{i phi_b} sin(theta/2), cos(theta/2)), phi_b = pi - phi."""
    b = np.array([np.exp(1j * (PI - phi)) * math.sin(theta / 2), math.cos(theta / 2)])
    proj = np.outer(b, b.conj())
    return np.eye(2) - proj + np.exp(1j * g) * proj


@given(st.floats(0, 2 * PI), st.floats(0, PI), st.floats(-PI, PI))
def test_target_matches_bright_projector(g, theta, phi):
    assert np.allclose(gt.target_unitary((g, theta, phi)), bright_target(g, theta, phi), atol=1e-12)


def test_named_targets_up_to_phase():
    x = SIG[0]
    y = SIG[1]
    rx2 = (np.eye(2) - 1j * x) / math.sqrt(2)
    ry2 = (np.eye(2) - 1j * y) / math.sqrt(2)
    cases = {"X": x, "Y": y, "X/2": rx2, "Y/2": ry2, "I": np.eye(2), "Z": SIG[2]}
    for name, ref in cases.items():
        assert gt.gate_fidelity(gt.target_unitary(gt.GateSpec.named(name)), ref) > 1 - 1e-12, name
    t = gt.target_unitary(gt.GateSpec.named("T"))
    assert gt.gate_fidelity(t, np.diag([1, np.exp(1j * PI / 4)])) > 1 - 1e-12


def test_unknown_alias():
    with pytest.raises(ValueError):
        gt.GateSpec.named("H")


@given(st.integers(0, 2**31))
def test_fidelity_phase_invariance(seed):
    rng = np.random.default_rng(seed)
    a = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))[0]
    ph = np.exp(1j * rng.uniform(0, 2 * PI))
    assert math.isclose(gt.gate_fidelity(ph * a, a), 1.0, rel_tol=1e-12)
    assert gt.gate_fidelity(a, np.eye(2)) <= 1 + 1e-12


@pytest.mark.parametrize("name", ["X/2", "Y", "T"])
@pytest.mark.parametrize("scheme", ["nhqc", "bnhqc"])
def test_simulated_gates_exact(name, scheme):
    g = gt.GateSpec.named(name)
    blk, leak = gt.simulate_gate(gt.synthesize(g, scheme))
    assert 1 - gt.gate_fidelity(blk, gt.target_unitary(g)) < 1e-10
    assert leak < 1e-10


def test_identity_has_zero_duration():
    s = gt.synthesize(gt.GateSpec.named("I"), "bnhqc")
    assert s.duration == 0
    blk, leak = gt.simulate_gate(s)
    assert np.allclose(blk, np.eye(2)) and leak < 1e-15


def test_synthesize_rejects_scheme():
    with pytest.raises(ValueError):
        gt.synthesize(gt.GateSpec.named("X"), "grape")


@pytest.fixture(scope="module")
def cy_result():
    p = ss.SpinSystemParams()
    return gt.simulate_cy(p, gt.cy_schedule(p))


def test_cy_target_structure():
    u = gt.cy_target()
    ry = np.array([[0, -1], [1, 0]], complex)
    # electron (x) nuclear; nuclear |1> applies Ry(pi) to the electron
    for e in range(2):
        for n in range(2):
            col = np.zeros(4)
            col[2 * e + n] = 1
            out = u @ col
            exp = np.kron(ry @ np.eye(2)[e] if n else np.eye(2)[e], np.eye(2)[n])
            assert np.allclose(out, exp)


def test_simulated_cy(cy_result):
    u9, u4 = cy_result
    assert np.allclose(u9.conj().T @ u9, np.eye(9), atol=1e-10)
    assert gt.gate_fidelity(u4, gt.cy_target()) > 0.999
    psi = gt.bell_from_cy(u4)
    assert abs(np.vdot(gt.BELL, psi)) ** 2 / np.vdot(psi, psi).real > 0.999


@given(st.floats(0, 0.05), st.floats(0, 0.2), st.integers(5, 40))
def test_repeat_experiment_closed_form(p, eps, n_max):
    series = gt.repeat_gate_experiment(gt.GateSpec.named("X"), n_max, ev.NoiseModel(depol_per_gate=p), eps)
    n = np.arange(1, n_max + 1)
    assert np.allclose(series, (1 + (1 - eps) * (1 - p) ** n) / 2, atol=1e-13)


def test_repeat_cy_closed_form():
    s = gt.repeat_cy_experiment(10, 0.035)
    n = np.arange(1, 11)
    assert np.allclose(s, 0.75 * 0.965**n + 0.25, atol=1e-14)


@given(st.floats(0, 0.3), st.floats(0.001, 0.05))
def test_single_fit_round_trip(eps, p):
    series = gt.single_decay_model(np.arange(1, 33), eps, p)
    fit = gt.fit_single_decay(series)
    assert abs(fit.eps_if - eps) < 1e-9 and abs(fit.p - p) < 1e-9


def test_single_fit_free_scale_invariance():
    series = gt.single_decay_model(np.arange(1, 33), 0.02, 0.01)
    a = gt.fit_single_decay(series, free_scale=True)
    b = gt.fit_single_decay(0.7 * series, free_scale=True)
    assert abs(a.p - b.p) < 1e-9 and abs(b.scale - 0.7) < 1e-9


@given(st.floats(0.3, 0.9), st.floats(0.05, 0.4), st.floats(0.8, 0.999))
def test_two_qubit_fit_round_trip(a, b, f):
    series = gt.two_qubit_decay_model(np.arange(1, 16), a, b, f)
    fit = gt.fit_two_qubit_decay(series)
    assert abs(fit.F_g - f) < 1e-8 and abs(fit.A - a) < 1e-6 and abs(fit.B - b) < 1e-6


def test_fit_needs_points():
    with pytest.raises(ValueError):
        gt.fit_single_decay([0.9, 0.8])
    with pytest.raises(ValueError):
        gt.fit_two_qubit_decay([0.9, 0.8])
