"""Target gates, fidelity measures, the C-Y construction and repeated-gate decay fits."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from . import evolve
from .numerics import SIGMA_X, SIGMA_Y, SIGMA_Z, kron
from .pulses import (
    Envelope,
    PulseSchedule,
    identity_schedule,
    make_bnhqc,
    make_nhqc,
)
from .spinsys import SpinSystemParams

PI = math.pi
TWO_PI = 2.0 * PI

# default operating points, rad/us
BNHQC_RABI = TWO_PI * 12.5
NHQC_GAUSS_PEAK = TWO_PI * 12.76

ALIASES: dict[str, tuple[float, float, float]] = {
    "I": (0.0, 0.0, 0.0),
    "X/2": (PI / 2, PI / 2, 0.0),
    "X": (PI, PI / 2, 0.0),
    "Y/2": (PI / 2, PI / 2, PI / 2),
    "Y": (PI, PI / 2, PI / 2),
    "T": (PI / 4, 0.0, 0.0),
    "Z": (PI, 0.0, 0.0),
}
QPT_SUITE = ("I", "X/2", "X", "Y/2", "Y", "T")


@dataclass(frozen=True)
class GateSpec:
    gamma: float
    theta: float
    phi: float
    name: str | None = None

    @classmethod
    def named(cls, alias: str) -> "GateSpec":
        try:
            g, t, p = ALIASES[alias]
        except KeyError:
            raise ValueError(f"unknown gate alias {alias!r}; choose from {sorted(ALIASES)}") from None
        return cls(g, t, p, alias)

    @property
    def is_identity(self) -> bool:
        return self.name == "I" or self.gamma == 0.0

    def label(self) -> str:
        return self.name or f"(gamma={self.gamma:.12g},theta={self.theta:.12g},phi={self.phi:.12g})"

    def to_dict(self) -> dict:
        d = {"gamma": self.gamma, "theta": self.theta, "phi": self.phi}
        if self.name:
            d["name"] = self.name
        return d


def target_unitary(g: GateSpec | tuple) -> np.ndarray:
    """``e^{i gamma/2} exp(-i gamma/2 n.sigma)`` in qubit order (|0>, |1>)."""
    if not isinstance(g, GateSpec):
        g = GateSpec(*g)
    n = (
        math.sin(g.theta) * math.cos(g.phi),
        math.sin(g.theta) * math.sin(g.phi),
        math.cos(g.theta),
    )
    ns = n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z
    h = g.gamma / 2.0
    return np.exp(1j * h) * (math.cos(h) * np.eye(2) - 1j * math.sin(h) * ns)


def target_unitary_of(s: PulseSchedule) -> np.ndarray:
    return target_unitary(GateSpec(s.gamma, s.theta, s.phi))


def gate_fidelity(u_sim: np.ndarray, u_tgt: np.ndarray) -> float:
    """Average gate fidelity ``(|Tr M|^2 + Tr M^+M) / (d(d+1))`` with ``M = U_tgt^+ U_sim``."""
    m = u_tgt.conj().T @ u_sim
    d = m.shape[0]
    val = (abs(np.trace(m)) ** 2 + np.trace(m.conj().T @ m).real) / (d * (d + 1))
    return float(min(max(val, 0.0), 1.0))


def trace_fidelity(u_sim: np.ndarray, u_tgt: np.ndarray) -> float:
    """``|Tr(U_tgt^+ U_sim)| / d``; diagnostic only."""
    return float(abs(np.trace(u_tgt.conj().T @ u_sim)) / u_tgt.shape[0])


def synthesize(
    g: GateSpec,
    scheme: str,
    rabi: float | None = None,
    envelope: Envelope | None = None,
) -> PulseSchedule:
    """Schedule for a gate under ``scheme`` ('nhqc' or 'bnhqc')."""
    if g.is_identity:
        return identity_schedule(g.theta, g.phi, scheme)
    if scheme == "bnhqc":
        return make_bnhqc(g.gamma, g.theta, g.phi, BNHQC_RABI if rabi is None else rabi)
    if scheme == "nhqc":
        if envelope is None:
            envelope = (
                Envelope("gaussian", NHQC_GAUSS_PEAK, baseline_subtract=True)
                if rabi is None
                else Envelope("constant", rabi)
            )
        return make_nhqc(g.gamma, g.theta, g.phi, envelope)
    raise ValueError(f"unknown scheme {scheme!r}")


def simulate_gate(s: PulseSchedule, policy=None) -> tuple[np.ndarray, float]:
    """Qubit block of the simulated 3-level propagator and its final leakage."""
    policy = policy or evolve.StepPolicy()
    tr = evolve.propagate_unitary(s, 3, policy)
    return evolve.qubit_block(tr.final, 3), tr.leakage_final


# -- two-qubit C-Y -----------------------------------------------------------


def cy_target() -> np.ndarray:
    """``blockdiag(1, R_y(pi))`` with the nuclear spin as control, electron-major ordering."""
    ry = np.array([[0.0, -1.0], [1.0, 0.0]], dtype=complex)
    p0 = np.diag([1.0, 0.0]).astype(complex)
    p1 = np.diag([0.0, 1.0]).astype(complex)
    # ordering |e n>: control is the second factor
    return kron(np.eye(2), p0) + kron(ry, p1)


@dataclass(frozen=True)
class CYSchedules:
    rotate: PulseSchedule  # on m_I = +1
    identity: PulseSchedule  # on m_I = -1
    rabi: float


def cy_schedule(
    p: SpinSystemParams,
    electron_gate: GateSpec | None = None,
    omega: float = TWO_PI * 0.08,
    scheme: str = "bnhqc",
) -> CYSchedules:
    """Conditional pair of loops for C-Y.

    The ``m_I=+1`` manifold gets a loop for ``electron_gate`` (default Y,
    i.e. ``(pi, pi/2, pi/2)``), brachistochrone or orange-slice per
    ``scheme``. The ``m_I=-1`` manifold gets a constant-amplitude
    orange-slice loop with ``gamma = 2 pi``: trivial holonomy, and the same
    ``2 pi / omega`` duration as a ``gamma = pi`` loop. ``omega`` must stay
    well below the ``2 A_hf`` manifold splitting.
    """
    g = electron_gate or GateSpec.named("Y")
    if scheme == "bnhqc":
        rot = make_bnhqc(g.gamma, g.theta, g.phi, omega)
    elif scheme == "nhqc":
        rot = make_nhqc(g.gamma, g.theta, g.phi, Envelope("constant", omega))
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    idle = make_nhqc(TWO_PI, g.theta, g.phi, Envelope("constant", omega))
    return CYSchedules(rot, idle, omega)


def cy_frame_correction() -> np.ndarray:
    """Virtual phase ``diag(1, -i)`` on the nuclear qubit (drive-frame update, zero duration).

    The Y loop yields ``sigma_y = i R_y(pi)``; the correction removes the ``i``.
    """
    return kron(np.eye(2), np.diag([1.0, -1j]))


def simulate_cy(p: SpinSystemParams, sched: CYSchedules, policy=None) -> tuple[np.ndarray, np.ndarray]:
    """(9x9 interaction-picture propagator, corrected 4x4 computational block)."""
    policy = policy or evolve.StepPolicy()
    drives = [evolve.ManifoldDrive(sched.rotate, +1), evolve.ManifoldDrive(sched.identity, -1)]
    u9 = evolve.propagate_hybrid(p, drives, policy)
    blk = evolve.qubit_block(u9, 9)
    return u9, cy_frame_correction() @ blk


def bell_from_cy(u4: np.ndarray) -> np.ndarray:
    """Output of C-Y on ``|0>_e |+>_n`` (electron-major ordering)."""
    psi = kron(np.array([[1.0], [0.0]]), np.array([[1.0], [1.0]]) / math.sqrt(2.0))[:, 0]
    return u4 @ psi


BELL = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / math.sqrt(2.0)


# -- repeated-gate decay ------------------------------------------------------


def _cardinal_states() -> list[np.ndarray]:
    s = 1.0 / math.sqrt(2.0)
    vecs = [
        np.array([1, 0]),
        np.array([0, 1]),
        np.array([s, s]),
        np.array([s, -s]),
        np.array([s, 1j * s]),
        np.array([s, -1j * s]),
    ]
    return [np.outer(v, np.conj(v)).astype(complex) for v in vecs]


def repeat_gate_experiment(
    g: GateSpec,
    n_max: int,
    noise: evolve.NoiseModel = evolve.NoiseModel(),
    eps_if: float = 0.0,
    u_gate: np.ndarray | None = None,
) -> np.ndarray:
    """Measured fidelity after ``N = 1..n_max`` applications.

    Each application is the (simulated or ideal) gate followed by a
    depolarizing channel of strength ``noise.depol_per_gate``. SPAM error is
    a depolarization of strength ``eps_if`` on the prepared state. The
    fidelity is the overlap with the ideal output, averaged over the six
    cardinal input states.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    u = target_unitary(g) if u_gate is None else u_gate
    ut = target_unitary(g)
    p = noise.depol_per_gate
    out = np.zeros(n_max)
    for rho0 in _cardinal_states():
        rho = evolve.depolarize(rho0, eps_if)
        ideal = rho0
        for n in range(1, n_max + 1):
            rho = evolve.depolarize(u @ rho @ u.conj().T, p)
            ideal = ut @ ideal @ ut.conj().T
            out[n - 1] += np.trace(ideal @ rho).real
    return out / 6.0


def repeat_cy_experiment(
    n_max: int, p_gate: float, eps_if: float = 0.0, u_cy: np.ndarray | None = None
) -> np.ndarray:
    """Bell-preparation state fidelity after ``N`` C-Y applications with two-qubit depolarizing noise."""
    u = cy_target() if u_cy is None else u_cy
    ut = cy_target()
    psi0 = kron(np.array([[1.0], [0.0]]), np.array([[1.0], [1.0]]) / math.sqrt(2.0))[:, 0]
    rho = evolve.depolarize(np.outer(psi0, psi0.conj()), eps_if)
    ideal = psi0.copy()
    out = np.zeros(n_max)
    for n in range(1, n_max + 1):
        rho = evolve.depolarize(u @ rho @ u.conj().T, p_gate)
        ideal = ut @ ideal
        out[n - 1] = np.real(ideal.conj() @ rho @ ideal)
    return out


class FitFailure(RuntimeError):
    def __init__(self, message: str, residuals: np.ndarray | None = None):
        super().__init__(message)
        self.residuals = residuals


@dataclass
class DecayFit:
    eps_if: float
    p: float
    covariance: np.ndarray
    scale: float = 1.0


@dataclass
class TwoQubitDecayFit:
    A: float
    B: float
    F_g: float
    covariance: np.ndarray


def single_decay_model(n, eps_if, p, scale=1.0):
    n = np.asarray(n, dtype=float)
    return scale * (1.0 + (1.0 - eps_if) * (1.0 - p) ** n) / 2.0


def _covariance(res) -> np.ndarray:
    j = res.jac
    dof = max(1, len(res.fun) - len(res.x))
    s2 = float(res.fun @ res.fun) / dof
    try:
        return np.linalg.inv(j.T @ j) * s2
    except np.linalg.LinAlgError:
        return np.full((len(res.x), len(res.x)), np.inf)


def fit_single_decay(series, n=None, free_scale: bool = False, max_nfev: int = 2000) -> DecayFit:
    """Least-squares fit of ``F_N = [1 + (1 - eps_if)(1 - p)^N] / 2``.

    With ``free_scale`` an overall multiplier is fitted too and the residuals
    are normalised by it, so rescaling the whole series leaves ``p`` unchanged.
    """
    y = np.asarray(series, dtype=float)
    if len(y) < 3:
        raise ValueError("need at least 3 points")
    n = np.arange(1, len(y) + 1) if n is None else np.asarray(n, dtype=float)
    # start from a log-linear estimate
    amp = np.clip(2.0 * y - 1.0, 1e-6, None)
    slope = np.polyfit(n, np.log(amp), 1)[0]
    p0 = float(np.clip(1.0 - math.exp(slope), 1e-6, 0.5))
    e0 = float(np.clip(1.0 - amp[0] / (1.0 - p0) ** n[0], 0.0, 0.5))
    if free_scale:
        def resid(x):
            return single_decay_model(n, x[0], x[1], x[2]) / x[2] - y / x[2]
        x0, lo, hi = [e0, p0, 1.0], [0.0, 0.0, 1e-3], [1.0, 1.0, np.inf]
    else:
        def resid(x):
            return single_decay_model(n, x[0], x[1]) - y
        x0, lo, hi = [e0, p0], [0.0, 0.0], [1.0, 1.0]
    res = least_squares(resid, x0, bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    if not res.success:
        raise FitFailure(f"single decay fit did not converge: {res.message}", res.fun)
    scale = float(res.x[2]) if free_scale else 1.0
    return DecayFit(float(res.x[0]), float(res.x[1]), _covariance(res), scale)


def two_qubit_decay_model(n, a, b, f_g):
    return a * np.asarray(f_g, dtype=float) ** np.asarray(n, dtype=float) + b


def fit_two_qubit_decay(series, n=None, max_nfev: int = 2000) -> TwoQubitDecayFit:
    """Least-squares fit of ``F_s(N) = A F_g^N + B``."""
    y = np.asarray(series, dtype=float)
    if len(y) < 3:
        raise ValueError("need at least 3 points")
    n = np.arange(1, len(y) + 1) if n is None else np.asarray(n, dtype=float)
    b0 = min(float(y.min()) - 0.05, 0.25)
    amp = np.clip(y - b0, 1e-9, None)
    sl, ic = np.polyfit(n, np.log(amp), 1)
    x0 = [math.exp(ic), b0, float(np.clip(math.exp(sl), 0.0, 1.0))]

    def resid(x):
        return two_qubit_decay_model(n, *x) - y

    res = least_squares(resid, x0, bounds=([-np.inf, -np.inf, 0.0], [np.inf, np.inf, 1.0]),
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    if not res.success:
        raise FitFailure(f"two-qubit decay fit did not converge: {res.message}", res.fun)
    return TwoQubitDecayFit(float(res.x[0]), float(res.x[1]), float(res.x[2]), _covariance(res))

