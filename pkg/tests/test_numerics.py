import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from bnhqc import numerics as nm
from conftest import random_hermitian


@given(st.integers(0, 10_000), st.sampled_from([2, 3, 4, 9]), st.floats(-5, 5))
def test_mat_exp_hermitian_matches_scipy(seed, d, t):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, d)
    u = nm.mat_exp(h, -1j * t)
    assert np.allclose(u, scipy.linalg.expm(-1j * t * h), atol=1e-11)
    assert nm.is_unitary(u, 1e-11)


def test_closed_su2_form_batched(rng):
    hs = np.stack([random_hermitian(rng, 2) for _ in range(50)])
    hs[0] = np.diag([0.3, 0.3])  # degenerate: r = 0
    out = nm.expm_hermitian(hs, -0.7j)
    ref = np.stack([scipy.linalg.expm(-0.7j * h) for h in hs])
    assert np.max(np.abs(out - ref)) < 1e-13


def test_non_hermitian_goes_through_pade(rng):
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert np.allclose(nm.mat_exp(a, 0.3), scipy.linalg.expm(0.3 * a), atol=1e-12)


@given(st.integers(0, 10_000))
def test_exp_inverse(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    assert np.allclose(nm.mat_exp(a, 1.0) @ nm.mat_exp(a, -1.0), np.eye(4), atol=1e-9)


@given(st.integers(1, 40), st.integers(0, 10_000))
def test_ordered_product_matches_loop(n, seed):
    rng = np.random.default_rng(seed)
    stack = rng.normal(size=(n, 3, 3)) + 1j * rng.normal(size=(n, 3, 3))
    ref = np.eye(3, dtype=complex)
    for m in stack:
        ref = m @ ref
    assert np.allclose(nm.ordered_product(stack), ref, rtol=1e-10, atol=1e-10 * np.abs(ref).max())


def test_ordered_product_empty():
    assert np.array_equal(nm.ordered_product(np.zeros((0, 2, 2), complex)), np.eye(2))


def test_kron_associative(rng):
    a, b, c = (rng.normal(size=(2, 2)) for _ in range(3))
    assert np.allclose(nm.kron(a, b, c), np.kron(np.kron(a, b), c))
    with pytest.raises(nm.DimensionError):
        nm.kron()


def test_shape_errors():
    with pytest.raises(nm.DimensionError):
        nm.mat_exp(np.zeros((2, 3)))
    with pytest.raises(nm.DimensionError):
        nm.mat_exp(np.zeros((17, 17)))
    with pytest.raises(nm.DimensionError):
        nm.as_matrix(np.zeros(3))


def test_pauli_algebra():
    x, y, z = nm.SIGMA_X, nm.SIGMA_Y, nm.SIGMA_Z
    assert np.allclose(x @ y, 1j * z)
    assert all(nm.is_hermitian(p) and nm.is_unitary(p) for p in nm.PAULIS)
