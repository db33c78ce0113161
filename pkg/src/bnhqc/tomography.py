"""State and process tomography by linear inversion plus projection."""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from . import evolve
from .gates import QPT_SUITE, GateSpec, target_unitary
from .numerics import PAULIS, kron

PAULI_LABELS = ("I", "X", "Y", "Z")
_PAULI = dict(zip(PAULI_LABELS, PAULIS))


class MissingSettingError(ValueError):
    def __init__(self, missing: Sequence[str]):
        super().__init__(f"missing Pauli settings: {', '.join(missing)}")
        self.missing = list(missing)


class RankDeficiencyError(ValueError):
    pass


def pauli_labels(dims: int) -> list[str]:
    """Non-identity Pauli strings for 1 (dims 2) or 2 (dims 4) qubits."""
    if dims == 2:
        return ["X", "Y", "Z"]
    if dims == 4:
        return [a + b for a, b in itertools.product(PAULI_LABELS, repeat=2) if a + b != "II"]
    raise ValueError(f"tomography supports dims 2 or 4, got {dims}")


def pauli_operator(label: str) -> np.ndarray:
    return kron(*(_PAULI[c] for c in label))


def expectations(rho: np.ndarray) -> dict[str, float]:
    """Exact Pauli expectations of ``rho`` (the forward model of :func:`qst`)."""
    d = rho.shape[0]
    return {lab: float(np.trace(rho @ pauli_operator(lab)).real) for lab in pauli_labels(d)}


def project_density(rho: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues, then renormalise the trace."""
    rho = 0.5 * (rho + rho.conj().T)
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        return np.eye(len(w), dtype=complex) / len(w)
    w = w / w.sum()
    return (v * w) @ v.conj().T


def qst(measured: Mapping[str, float], dims: int = 2) -> np.ndarray:
    """Density matrix from Pauli expectations (linear inversion, then PSD projection)."""
    labels = pauli_labels(dims)
    missing = [lab for lab in labels if lab not in measured]
    if missing:
        raise MissingSettingError(missing)
    rho = np.eye(dims, dtype=complex) / dims
    for lab in labels:
        rho = rho + float(measured[lab]) * pauli_operator(lab) / dims
    return project_density(rho)


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def state_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``."""
    rho, sigma = np.asarray(rho, complex), np.asarray(sigma, complex)
    if rho.shape != sigma.shape:
        raise ValueError(f"dimension mismatch {rho.shape} vs {sigma.shape}")
    sr = _psd_sqrt(rho)
    w = np.linalg.eigvalsh(sr @ sigma @ sr)
    f = float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)
    return min(max(f, 0.0), 1.0)


# -- process tomography ---------------------------------------------------------


def chi_of_unitary(u: np.ndarray) -> np.ndarray:
    """Rank-1 chi of ``rho -> u rho u^+`` in the Pauli basis ``{I, X, Y, Z}``."""
    coeffs = np.array([np.trace(p.conj().T @ u) / 2.0 for p in PAULIS])
    return np.outer(coeffs, coeffs.conj())


def chi_depolarizing(p: float) -> np.ndarray:
    return np.diag([1.0 - 0.75 * p, 0.25 * p, 0.25 * p, 0.25 * p]).astype(complex)


def apply_chi(chi: np.ndarray, rho: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rho, dtype=complex)
    for m, n in itertools.product(range(4), repeat=2):
        if chi[m, n] != 0:
            out += chi[m, n] * PAULIS[m] @ rho @ PAULIS[n].conj().T
    return out


def tp_defect(chi: np.ndarray) -> float:
    """``|| sum chi_mn E_n^+ E_m - I ||_F``."""
    acc = sum(chi[m, n] * PAULIS[n].conj().T @ PAULIS[m] for m in range(4) for n in range(4))
    return float(np.linalg.norm(acc - np.eye(2)))


# Hermitian 4x4 parameterisation: 16 real numbers
def _herm_basis() -> np.ndarray:
    out = []
    for i in range(4):
        e = np.zeros((4, 4), complex)
        e[i, i] = 1.0
        out.append(e)
    for i, j in itertools.combinations(range(4), 2):
        e = np.zeros((4, 4), complex)
        e[i, j] = e[j, i] = 1.0 / math.sqrt(2.0)
        out.append(e)
        e = np.zeros((4, 4), complex)
        e[i, j], e[j, i] = -1j / math.sqrt(2.0), 1j / math.sqrt(2.0)
        out.append(e)
    return np.array(out)


_HB = _herm_basis()


def _tp_constraint() -> tuple[np.ndarray, np.ndarray]:
    """Real linear system ``A x = b`` expressing trace preservation for Hermitian-basis coordinates."""
    rows = []
    for k in range(16):
        acc = sum(_HB[k][m, n] * PAULIS[n].conj().T @ PAULIS[m] for m in range(4) for n in range(4))
        rows.append(np.concatenate([acc.real.ravel(), acc.imag.ravel()]))
    a = np.array(rows).T  # 8 x 16
    b = np.concatenate([np.eye(2).ravel(), np.zeros(4)])
    return a, b


_TP_A, _TP_B = _tp_constraint()
_TP_PINV = np.linalg.pinv(_TP_A)


def _to_coords(chi: np.ndarray) -> np.ndarray:
    return np.array([np.vdot(e, chi).real for e in _HB])


def _from_coords(x: np.ndarray) -> np.ndarray:
    return np.tensordot(x, _HB, axes=1)


def project_cptp(chi: np.ndarray, tol: float = 1e-12, max_iter: int = 20000) -> np.ndarray:
    """Nearest (Frobenius) chi that is positive and trace preserving, by Dykstra's alternating projections."""
    x = _to_coords(0.5 * (chi + chi.conj().T))
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(max_iter):
        y = _tp_project(x + p)
        p = x + p - y
        m = _from_coords(y + q)
        w, v = np.linalg.eigh(m)
        x_new = _to_coords((v * np.clip(w, 0.0, None)) @ v.conj().T)
        q = y + q - x_new
        if np.linalg.norm(x_new - x) < tol and np.linalg.norm(x_new - y) < 1e-10:
            x = x_new
            break
        x = x_new
    # final snap onto the TP plane; any negativity this introduces is below the loop tolerance
    return _from_coords(_tp_project(x))


def _tp_project(x: np.ndarray) -> np.ndarray:
    return x - _TP_PINV @ (_TP_A @ x - _TP_B)


@dataclass
class QptResult:
    chi: np.ndarray
    chi_raw: np.ndarray
    probabilities: np.ndarray  # (n_inputs, n_analyses)
    shots: int | None
    seed: int | None


def _rotation_states(rotations: Sequence[np.ndarray]) -> list[np.ndarray]:
    ket0 = np.array([1.0, 0.0], complex)
    out = []
    for r in rotations:
        v = r @ ket0
        out.append(np.outer(v, v.conj()))
    return out


def default_rotations() -> list[np.ndarray]:
    return [target_unitary(GateSpec.named(a)) for a in QPT_SUITE]


def qpt(
    channel: Callable[[np.ndarray], np.ndarray],
    input_rotations: Sequence[np.ndarray] | None = None,
    analysis_rotations: Sequence[np.ndarray] | None = None,
    shots: int | None = None,
    seed: int = 0,
    spam: float = 0.0,
    contrast: float | None = None,
    project: bool = True,
) -> QptResult:
    """Reconstruct chi of ``channel`` (a map on 2x2 density matrices).

    Inputs are the rotations applied to ``|0>``. Each analysis rotation is
    followed by a ``Z`` readout returning ``P(|0>)``. ``spam`` depolarizes
    both the prepared state and the state just before readout. With finite
    ``shots`` every setting is sampled binomially from its own seeded stream.
    """
    ins = default_rotations() if input_rotations is None else list(input_rotations)
    ans = default_rotations() if analysis_rotations is None else list(analysis_rotations)
    rhos = _rotation_states(ins)
    proj0 = np.diag([1.0, 0.0]).astype(complex)
    meas = [a.conj().T @ proj0 @ a for a in ans]

    # design: P_ij = sum_k x_k Tr(M_j E(rho_i)) for E built from Hermitian basis element k
    design = np.zeros((len(rhos) * len(meas), 16))
    for k in range(16):
        for i, rho in enumerate(rhos):
            out = apply_chi(_HB[k], rho)
            for j, m in enumerate(meas):
                design[i * len(meas) + j, k] = np.trace(m @ out).real
    rank = np.linalg.matrix_rank(design, tol=1e-9)
    if rank < 16:
        raise RankDeficiencyError(f"input/analysis set spans rank {rank} of 16; add rotations")

    probs = np.zeros((len(rhos), len(meas)))
    for i, rho in enumerate(rhos):
        out = channel(evolve.depolarize(rho, spam))
        out = evolve.depolarize(out, spam)
        for j, m in enumerate(meas):
            probs[i, j] = np.clip(np.trace(m @ out).real, 0.0, 1.0)
    if shots is not None:
        probs = sample_probabilities(probs, shots, seed, contrast)

    x, *_ = np.linalg.lstsq(design, probs.ravel(), rcond=None)
    raw = _from_coords(x)
    chi = project_cptp(raw) if project else raw
    return QptResult(chi, raw, probs, shots, seed)


def sample_probabilities(probs: np.ndarray, shots: int, seed: int, contrast: float | None = None) -> np.ndarray:
    """Binomial estimates of ``probs``; each entry uses the stream ``(seed, flat index)``.

    With ``contrast`` C each shot is a photon click with probability ``1 - C P``
    and the estimate is ``(1 - clicks/shots)/C``.
    """
    if shots < 1:
        raise ValueError("shots must be at least 1")
    flat = probs.ravel()
    out = np.empty_like(flat)
    for k, p in enumerate(flat):
        rng = evolve.shot_rng(seed, k)
        if contrast is None:
            out[k] = rng.binomial(shots, p) / shots
        else:
            q = 1.0 - contrast * p
            out[k] = (1.0 - rng.binomial(shots, q) / shots) / contrast
    return out.reshape(probs.shape)


def unitary_channel(u: np.ndarray, depol: float = 0.0) -> Callable[[np.ndarray], np.ndarray]:
    return lambda rho: evolve.depolarize(u @ rho @ u.conj().T, depol)


def process_fidelity(chi_e: np.ndarray, chi_id: np.ndarray) -> float:
    """``|Tr(chi_E chi_id^+)|``."""
    return float(abs(np.trace(chi_e @ chi_id.conj().T)))


# -- export -------------------------------------------------------------------------


def matrix_to_json(m: np.ndarray) -> dict:
    return {"real": np.real(m).tolist(), "imag": np.imag(m).tolist()}


def matrix_from_json(d: dict) -> np.ndarray:
    return np.array(d["real"]) + 1j * np.array(d["imag"])


def chi_csv(chi: np.ndarray, labels: Sequence[str] = PAULI_LABELS) -> str:
    """Bar-chart layout: ``row, col, real, imag``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "col", "real", "imag"])
    for i, a in enumerate(labels):
        for j, b in enumerate(labels):
            w.writerow([a, b, f"{chi[i, j].real:.12g}", f"{chi[i, j].imag:.12g}"])
    return buf.getvalue()


def density_labels(dims: int) -> list[str]:
    if dims == 2:
        return ["0", "1"]
    return ["00", "01", "10", "11"]


def to_json(m: np.ndarray) -> str:
    return json.dumps(matrix_to_json(m))
