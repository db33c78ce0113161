import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bnhqc import evolve as ev
from bnhqc import gates as gt
from bnhqc import tomography as tm
from conftest import random_density

PI = math.pi
P = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]


def chi_from_kraus(kraus):
    """chi_mn = sum_k a_km a_kn^* with K_k = sum_m a_km P_m."""
    chi = np.zeros((4, 4), complex)
    for k in kraus:
        a = np.array([np.trace(p.conj().T @ k) / 2 for p in P])
        chi += np.outer(a, a.conj())
    return chi


def test_pauli_labels():
    assert tm.pauli_labels(2) == ["X", "Y", "Z"]
    assert len(tm.pauli_labels(4)) == 15 and "XX" in tm.pauli_labels(4)


@given(st.integers(0, 2**31), st.sampled_from([2, 4]))
def test_qst_inverts_expectations(seed, d):
    rho = random_density(np.random.default_rng(seed), d)
    out = tm.qst(tm.expectations(rho), d)
    assert np.allclose(out, rho, atol=1e-12)
    assert math.isclose(tm.state_fidelity(out, rho), 1.0, abs_tol=1e-9)


def test_qst_bell_and_missing():
    bell = {"XX": 1.0, "YY": -1.0, "ZZ": 1.0}
    full = {k: bell.get(k, 0.0) for k in tm.pauli_labels(4)}
    rho = tm.qst(full, 4)
    assert math.isclose(tm.state_fidelity(rho, np.outer(gt.BELL, gt.BELL.conj())), 1.0, abs_tol=1e-12)
    with pytest.raises(tm.MissingSettingError) as e:
        tm.qst(bell, 4)
    assert "XY" in e.value.missing


def test_qst_projects_unphysical():
    rho = tm.qst({"X": 0.9, "Y": 0.9, "Z": 0.9}, 2)
    w = np.linalg.eigvalsh(rho)
    assert w.min() >= -1e-12 and math.isclose(np.trace(rho).real, 1.0)


@given(st.floats(0, 1))
def test_depolarizing_chi_closed_form(p):
    kraus = [math.sqrt(1 - 3 * p / 4) * P[0]] + [math.sqrt(p / 4) * m for m in P[1:]]
    assert np.allclose(tm.chi_depolarizing(p), chi_from_kraus(kraus), atol=1e-14)


@given(st.floats(0, 2 * PI), st.floats(0, PI), st.floats(-PI, PI))
def test_chi_of_unitary_matches_kraus(g, th, ph):
    u = gt.target_unitary((g, th, ph))
    chi = tm.chi_of_unitary(u)
    assert np.allclose(chi, chi_from_kraus([u]), atol=1e-12)
    assert tm.tp_defect(chi) < 1e-12


@given(st.integers(0, 2**31))
def test_apply_chi_matches_channel(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, 2)
    u = gt.target_unitary((1.1, 0.4, 0.3))
    out = tm.apply_chi(tm.chi_of_unitary(u), rho)
    assert np.allclose(out, u @ rho @ u.conj().T, atol=1e-12)


@given(st.floats(0, 1))
def test_qpt_depolarizing_exact(p):
    r = tm.qpt(lambda rho: ev.depolarize(rho, p))
    assert np.max(np.abs(r.chi - tm.chi_depolarizing(p))) < 1e-8


def test_qpt_unitary_and_cptp():
    u = gt.target_unitary(gt.GateSpec.named("T"))
    r = tm.qpt(tm.unitary_channel(u))
    assert math.isclose(tm.process_fidelity(r.chi, tm.chi_of_unitary(u)), 1.0, abs_tol=1e-9)
    noisy = tm.qpt(tm.unitary_channel(u, 0.01), shots=500, seed=3, spam=0.01)
    assert np.linalg.eigvalsh(noisy.chi).min() > -1e-9
    assert tm.tp_defect(noisy.chi) < 1e-8


def test_qpt_seeded():
    ch = tm.unitary_channel(np.eye(2), 0.05)
    a = tm.qpt(ch, shots=200, seed=5)
    b = tm.qpt(ch, shots=200, seed=5)
    c = tm.qpt(ch, shots=200, seed=6)
    assert np.array_equal(a.chi, b.chi) and not np.array_equal(a.chi, c.chi)


def test_qpt_contrast_readout_unbiased_in_limit():
    ch = tm.unitary_channel(np.eye(2), 0.0)
    r = tm.qpt(ch, shots=2_000_000, seed=1, contrast=0.27)
    assert tm.process_fidelity(r.chi, tm.chi_of_unitary(np.eye(2))) > 0.995


def test_qpt_rank_deficient():
    with pytest.raises(tm.RankDeficiencyError):
        tm.qpt(lambda r: r, input_rotations=[np.eye(2)], analysis_rotations=[np.eye(2)])


@given(st.integers(0, 2**31))
def test_project_cptp(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    chi = tm.project_cptp(0.5 * (a + a.conj().T))
    assert np.linalg.eigvalsh(chi).min() > -1e-9 and tm.tp_defect(chi) < 1e-8


def test_json_roundtrip_and_csv():
    chi = tm.chi_depolarizing(0.1) + 0.01j * np.diag([0, 1, 0, 0])
    assert np.array_equal(tm.matrix_from_json(tm.matrix_to_json(chi)), chi)
    lines = tm.chi_csv(chi).splitlines()
    assert lines[0] == "row,col,real,imag" and len(lines) == 17
