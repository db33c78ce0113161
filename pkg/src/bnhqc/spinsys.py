"""Hamiltonians of the NV electron spin and the electron--14N register.

Conventions used everywhere in the package:

* Angular frequencies in rad/us, times in us, fields in gauss.
* Spin-1 basis order is ``(m=+1, m=0, m=-1)``.
* Qubit encoding: ``|0> = m_s=-1``, ``|1> = m_s=+1``, ancilla ``|a> = m_s=0``.
  In a 3-level array the qubit states therefore sit at indices 2 and 0.
* Tone 1 drives ``|0> <-> |a>`` (the ``m_s=-1`` transition at ``D - gamma_e B``),
  tone 2 drives ``|a> <-> |1>`` (``m_s=+1`` at ``D + gamma_e B``).
* Drive phases ``phi1, phi2`` are the phases of the rotating-frame couplings
  ``<0|H|a> = Omega1/2 e^{i phi1}`` and ``<1|H|a> = Omega2/2 e^{i phi2}``.
  A physical ``cos(w t + phase)`` field produces the conjugate phase, so
  :func:`drive_tones` negates them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .numerics import kron

TWO_PI = 2.0 * math.pi

SZ1 = np.diag([1.0, 0.0, -1.0]).astype(complex)
SX1 = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / math.sqrt(2.0)
I3 = np.eye(3, dtype=complex)

IDX_ONE, IDX_ANC, IDX_ZERO = 0, 1, 2
QUBIT_IDX3 = (IDX_ZERO, IDX_ONE)


@dataclass(frozen=True)
class SpinSystemParams:
    D: float = TWO_PI * 2870.0
    gamma_e: float = TWO_PI * 2.8025
    gamma_n: float = TWO_PI * -3.077e-4
    P_quad: float = TWO_PI * -4.95
    A_hf: float = TWO_PI * 2.16
    B0: float = 510.0

    def __post_init__(self):
        if not self.D > 0:
            raise ValueError(f"D must be positive, got {self.D}")
        if self.B0 < 0:
            raise ValueError(f"B0 must be non-negative, got {self.B0}")

    def to_mhz_dict(self) -> dict:
        """Cyclic-MHz view used by the JSON config (``B0`` stays in gauss)."""
        out = {
            "D_mhz": self.D / TWO_PI,
            "gamma_e_mhz_per_gauss": self.gamma_e / TWO_PI,
            "gamma_n_mhz_per_gauss": self.gamma_n / TWO_PI,
            "P_quad_mhz": self.P_quad / TWO_PI,
            "A_hf_mhz": self.A_hf / TWO_PI,
            "B0_gauss": self.B0,
        }
        return out

    @classmethod
    def from_mhz(
        cls,
        D_mhz: float = 2870.0,
        gamma_e_mhz_per_gauss: float = 2.8025,
        gamma_n_mhz_per_gauss: float = -3.077e-4,
        P_quad_mhz: float = -4.95,
        A_hf_mhz: float = 2.16,
        B0_gauss: float = 510.0,
    ) -> "SpinSystemParams":
        return cls(
            D=TWO_PI * D_mhz,
            gamma_e=TWO_PI * gamma_e_mhz_per_gauss,
            gamma_n=TWO_PI * gamma_n_mhz_per_gauss,
            P_quad=TWO_PI * P_quad_mhz,
            A_hf=TWO_PI * A_hf_mhz,
            B0=B0_gauss,
        )

    def transition_frequencies(self) -> tuple[float, float]:
        """Bare electron transitions ``(w1, w2) = (D - gamma_e B, D + gamma_e B)``."""
        z = self.gamma_e * self.B0
        return self.D - z, self.D + z


@dataclass(frozen=True)
class DriveTone:
    carrier: float
    phase: float
    amplitude: float
    target: str = "0a"  # "0a": |0> <-> |a>,  "a1": |a> <-> |1>

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("tone amplitude must be non-negative")
        if self.target not in ("0a", "a1"):
            raise ValueError(f"unknown tone target {self.target!r}")


@dataclass(frozen=True)
class BrightFrame:
    """Bright/dark pair ``|b> = e^{i phi} sin(theta/2)|0> + cos(theta/2)|1>``."""

    theta: float
    phi: float

    @property
    def bright(self) -> np.ndarray:
        """Qubit-order vector (|0>, |1>)."""
        return np.array(
            [np.exp(1j * self.phi) * math.sin(self.theta / 2), math.cos(self.theta / 2)],
            dtype=complex,
        )

    @property
    def dark(self) -> np.ndarray:
        return np.array(
            [math.cos(self.theta / 2), -np.exp(-1j * self.phi) * math.sin(self.theta / 2)],
            dtype=complex,
        )

    @classmethod
    def from_amplitudes(cls, omega1: float, omega2: float, phi: float) -> "BrightFrame":
        return cls(2.0 * math.atan2(omega1, omega2), phi)

    def embed3(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(bright, dark, ancilla) as 3-level vectors in spin order (+1, 0, -1)."""
        b, d = self.bright, self.dark
        bb = np.zeros(3, complex)
        dd = np.zeros(3, complex)
        bb[IDX_ZERO], bb[IDX_ONE] = b
        dd[IDX_ZERO], dd[IDX_ONE] = d
        a = np.zeros(3, complex)
        a[IDX_ANC] = 1.0
        return bb, dd, a


def electron_hamiltonian_lab(
    p: SpinSystemParams, tones: Sequence[DriveTone], t: float
) -> np.ndarray:
    """Lab-frame electron Hamiltonian at time ``t`` (3x3, spin order +1, 0, -1).

    A tone with Rabi amplitude ``Omega`` corresponds to ``gamma_e B1 = sqrt(2) Omega``.
    """
    h = p.D * (SZ1 @ SZ1) + p.gamma_e * p.B0 * SZ1
    for tone in tones:
        h = h + math.sqrt(2.0) * tone.amplitude * math.cos(tone.carrier * t + tone.phase) * SX1
    return h


def frame_operator(t: float, omega1: float, omega2: float) -> np.ndarray:
    """``V = diag(e^{-i w2 t}, 1, e^{-i w1 t})`` in spin order (+1, 0, -1)."""
    return np.diag([np.exp(-1j * omega2 * t), 1.0, np.exp(-1j * omega1 * t)])


def rotating_frame(
    p: SpinSystemParams,
    tones: Sequence[DriveTone],
    t: float,
    omega1: float,
    omega2: float,
    rwa: bool = True,
) -> np.ndarray:
    """Rotating-frame Hamiltonian ``V^+ H V + i (dV^+/dt) V``.

    With ``rwa`` the counter-rotating terms are dropped and every tone only
    drives its own target transition; the result is then the static matrix
    with detunings on the diagonal and ``Omega_i/2 e^{+-i phase}`` couplings.
    """
    if not rwa:
        v = frame_operator(t, omega1, omega2)
        h = electron_hamiltonian_lab(p, tones, t)
        return v.conj().T @ h @ v - np.diag([omega2, 0.0, omega1])

    w_minus, w_plus = p.transition_frequencies()
    h = np.diag([w_plus - omega2, 0.0, w_minus - omega1]).astype(complex)
    for tone in tones:
        if tone.target == "a1":
            # co-rotating part of the +1 <-> 0 element
            c = 0.5 * tone.amplitude * np.exp(1j * ((omega2 - tone.carrier) * t - tone.phase))
            h[IDX_ONE, IDX_ANC] += c
            h[IDX_ANC, IDX_ONE] += np.conj(c)
        else:
            c = 0.5 * tone.amplitude * np.exp(1j * ((tone.carrier - omega1) * t + tone.phase))
            h[IDX_ANC, IDX_ZERO] += c
            h[IDX_ZERO, IDX_ANC] += np.conj(c)
    return h


def drive_tones(
    p: SpinSystemParams, omega1: float, omega2: float, phi1: float, phi2: float
) -> list[DriveTone]:
    """Resonant physical tones that realise couplings with phases ``phi1, phi2``."""
    w_minus, w_plus = p.transition_frequencies()
    return [
        DriveTone(carrier=w_minus, phase=-phi1, amplitude=omega1, target="0a"),
        DriveTone(carrier=w_plus, phase=-phi2, amplitude=omega2, target="a1"),
    ]


def lambda_hamiltonian(omega: float, phi2: float, frame: BrightFrame | None = None) -> np.ndarray:
    """``(Omega/2) e^{i phi2} |b><a| + h.c.`` in the ordered basis (|b>, |a>).

    Written out: ``(Omega/2)(cos(phi2) sx - sin(phi2) sy)``. The frame only
    fixes which qubit state is ``|b>``; the 2x2 form does not depend on it.
    """
    if omega < 0:
        raise ValueError("omega must be non-negative")
    c = 0.5 * omega * np.exp(1j * phi2)
    return np.array([[0.0, c], [np.conj(c), 0.0]], dtype=complex)


def lambda_hamiltonian3(omega1: float, omega2: float, phi1: float, phi2: float) -> np.ndarray:
    """Resonant rotating-frame 3-level Hamiltonian in spin order (+1, 0, -1)."""
    h = np.zeros((3, 3), dtype=complex)
    h[IDX_ONE, IDX_ANC] = 0.5 * omega2 * np.exp(1j * phi2)
    h[IDX_ZERO, IDX_ANC] = 0.5 * omega1 * np.exp(1j * phi1)
    h[IDX_ANC, IDX_ONE] = np.conj(h[IDX_ONE, IDX_ANC])
    h[IDX_ANC, IDX_ZERO] = np.conj(h[IDX_ZERO, IDX_ANC])
    return h


def hybrid_hamiltonian(p: SpinSystemParams) -> np.ndarray:
    """Electron--14N Hamiltonian (9x9, electron (x) nuclear, both ordered +1, 0, -1)."""
    b = p.B0
    return (
        p.D * kron(SZ1 @ SZ1, I3)
        + p.gamma_e * b * kron(SZ1, I3)
        + p.P_quad * kron(I3, SZ1 @ SZ1)
        + p.gamma_n * b * kron(I3, SZ1)
        + p.A_hf * kron(SZ1, SZ1)
    )


def hybrid_index(m_s: int, m_i: int) -> int:
    """Row of ``|m_s, m_I>`` in the 9-level basis."""
    return (1 - m_s) * 3 + (1 - m_i)


def electron_transition(p: SpinSystemParams, m_s: int, m_i: int) -> float:
    """Frequency of ``|0, m_I> -> |m_s, m_I>`` from the diagonal hybrid Hamiltonian."""
    e = np.real(np.diag(hybrid_hamiltonian(p)))
    return float(e[hybrid_index(m_s, m_i)] - e[hybrid_index(0, m_i)])
