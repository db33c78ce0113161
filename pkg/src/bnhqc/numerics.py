"""Small dense complex linear-algebra kernel.

Every operator in the package (Hamiltonians, propagators, density and
process matrices) is a plain ``numpy`` complex array. Dimensions stay at
or below 16, so nothing here cares about sparsity or blocking.
"""
from __future__ import annotations

from functools import reduce

import numpy as np
import scipy.linalg

ALG_TOL = 1e-10
UNITARY_TOL = 1e-12
MAX_DIM = 16

SIGMA_I = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_I, SIGMA_X, SIGMA_Y, SIGMA_Z)


class DimensionError(ValueError):
    """Raised when an operator has the wrong shape for the requested operation."""


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {m.shape}")
    return m


def is_hermitian(a, tol: float = ALG_TOL) -> bool:
    m = as_matrix(a)
    return m.shape[0] == m.shape[1] and np.linalg.norm(m - m.conj().T) <= tol


def is_unitary(a, tol: float = UNITARY_TOL) -> bool:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        return False
    return np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0])) <= tol


def dagger(a) -> np.ndarray:
    return np.swapaxes(np.conj(a), -1, -2)


def expm_hermitian(h: np.ndarray, scale: complex) -> np.ndarray:
    """exp(scale * h) for Hermitian ``h`` via eigendecomposition.

    ``h`` may be a stack of matrices with shape (..., d, d). Stacks of 2x2
    matrices with purely imaginary ``scale`` use the closed SU(2) form.
    """
    if h.shape[-1] == 2 and np.real(scale) == 0:
        return _expm_herm2(h, np.imag(scale))
    w, v = np.linalg.eigh(h)
    return (v * np.exp(scale * w)[..., None, :]) @ dagger(v)


def _expm_herm2(h: np.ndarray, s: float) -> np.ndarray:
    """exp(i s h) for Hermitian 2x2 ``h = h0 I + r.sigma``."""
    h0 = 0.5 * (h[..., 0, 0] + h[..., 1, 1]).real
    z = 0.5 * (h[..., 0, 0] - h[..., 1, 1]).real
    off = h[..., 0, 1]
    r = np.sqrt(z * z + np.abs(off) ** 2)
    c = np.cos(s * r)
    sinc = s * np.sinc(s * r / np.pi)  # sin(s r) / r, finite at r = 0
    out = np.empty(h.shape, dtype=complex)
    out[..., 0, 0] = c + 1j * sinc * z
    out[..., 1, 1] = c - 1j * sinc * z
    out[..., 0, 1] = 1j * sinc * off
    out[..., 1, 0] = 1j * sinc * np.conj(off)
    return out * np.exp(1j * s * h0)[..., None, None]


def mat_exp(a, scale: complex = 1.0, *, herm_tol: float = ALG_TOL) -> np.ndarray:
    """Return ``exp(scale * a)``.

    Hermitian inputs go through an eigendecomposition, which keeps
    ``exp(-i t H)`` unitary to machine precision. Anything else uses
    Pade scaling-and-squaring.
    """
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"mat_exp needs a square matrix, got {m.shape}")
    if m.shape[0] > MAX_DIM:
        raise DimensionError(f"dimension {m.shape[0]} exceeds {MAX_DIM}")
    if is_hermitian(m, herm_tol):
        return expm_hermitian(0.5 * (m + m.conj().T), scale)
    return expm_pade(m, scale)


def expm_pade(a, scale: complex = 1.0) -> np.ndarray:
    """General-matrix route (scaling-and-squaring Pade)."""
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"mat_exp needs a square matrix, got {m.shape}")
    return scipy.linalg.expm(scale * m)


def kron(*mats) -> np.ndarray:
    """Kronecker product of one or more matrices, left to right."""
    if not mats:
        raise DimensionError("kron needs at least one operand")
    return reduce(np.kron, (as_matrix(m) for m in mats))


def ordered_product(stack: np.ndarray) -> np.ndarray:
    """Time-ordered product ``U[n-1] @ ... @ U[1] @ U[0]`` of a stack.

    Pairwise reduction keeps the Python-level loop at log2(n) numpy calls.
    """
    us = np.asarray(stack)
    if us.shape[0] == 0:
        return np.eye(us.shape[-1], dtype=complex)
    while us.shape[0] > 1:
        if us.shape[0] % 2:
            eye = np.broadcast_to(np.eye(us.shape[-1], dtype=us.dtype), (1,) + us.shape[1:])
            us = np.concatenate([us, eye], axis=0)
        us = us[1::2] @ us[0::2]
    return us[0]


def frobenius(a) -> float:
    return float(np.linalg.norm(np.asarray(a)))
