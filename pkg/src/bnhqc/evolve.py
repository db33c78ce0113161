"""Propagation of schedules: unitary, Lindblad, and quasi-static Monte Carlo.

The integrator is a piecewise-constant exponential one. Each step
exponentiates an effective Hermitian generator, so unitarity holds by
construction. ``order=2`` is the midpoint rule; ``order=4`` (default) adds
the two-point Gauss commutator correction of the fourth-order Magnus
expansion. Steps never straddle segment boundaries.

Dimensions:

* ``2``: the driven ``{|b>, |a>}`` pair only.
* ``3``: the electron spin-1 in spin order (+1, 0, -1), i.e. (|1>, |a>, |0>).
* ``9``: electron (x) 14N, see :func:`propagate_hybrid`.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .numerics import SIGMA_Z, dagger, expm_hermitian, kron, ordered_product
from .pulses import PulseSchedule, segment_grids
from .spinsys import (
    I3,
    QUBIT_IDX3,
    SZ1,
    BrightFrame,
    SpinSystemParams,
    electron_transition,
    hybrid_index,
)

_GAUSS = math.sqrt(3.0) / 6.0


@dataclass(frozen=True)
class StepPolicy:
    max_phase: float = 0.005  # bound on (rate * dt) per step, rad
    order: int = 4

    def __post_init__(self):
        if not self.max_phase > 0:
            raise ValueError("max_phase must be positive")
        if self.max_phase > 0.05:
            raise ValueError("max_phase above 0.05 rad per step is not allowed")
        if self.order not in (2, 4):
            raise ValueError("order must be 2 or 4")


@dataclass(frozen=True)
class NoiseModel:
    detuning_sigma: float = 0.0
    amplitude_rel_sigma: float = 0.0
    dephasing_rate_e: float = 0.0
    dephasing_rate_n: float = 0.0
    depol_per_gate: float = 0.0

    def __post_init__(self):
        for name in ("detuning_sigma", "amplitude_rel_sigma", "dephasing_rate_e", "dephasing_rate_n"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 <= self.depol_per_gate <= 1.0:
            raise ValueError("depol_per_gate must lie in [0, 1]")

    @property
    def quasi_static(self) -> bool:
        return self.detuning_sigma > 0 or self.amplitude_rel_sigma > 0


@dataclass
class TrajectoryResult:
    times: np.ndarray
    states: np.ndarray  # unitaries or density matrices, shape (n, d, d)
    dims: int
    frame: BrightFrame | None = None
    kind: str = "unitary"
    leakage_final: float = field(default=float("nan"))

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


# -- Hamiltonian stacks ---------------------------------------------------


def schedule_hamiltonians(
    s: PulseSchedule,
    t: np.ndarray,
    dims: int,
    delta: float = 0.0,
    amp_scale: float = 1.0,
    extended: bool = False,
) -> np.ndarray:
    """Stack of Hamiltonians at times ``t``.

    ``delta`` is a quasi-static Zeeman shift ``delta * S_z`` (dims 3 only);
    the schedule's own ``detuning`` is a ``sigma_z`` term in the {b, a} pair.
    ``extended`` builds the dims-2 stack in long double, for residual checks
    that would otherwise sit at the float64 rounding floor.
    """
    omega, phase = s.sample(t)
    omega = amp_scale * omega
    n = len(t)
    cdtype = np.clongdouble if extended else complex
    if extended:
        omega, phase = omega.astype(np.longdouble), phase.astype(np.longdouble)
    c = 0.5 * omega * np.exp(1j * phase)
    if dims == 2:
        h = np.zeros((n, 2, 2), dtype=cdtype)
        h[:, 0, 1] = c
        h[:, 1, 0] = np.conj(c)
        h[:, 0, 0] = s.detuning
        h[:, 1, 1] = -s.detuning
        if delta:
            raise ValueError("quasi-static Zeeman noise needs dims=3")
        return h
    if dims != 3:
        raise ValueError(f"schedule propagation supports dims 2 or 3, got {dims}")
    bright, _, anc = s.frame.embed3()
    # c e^{i phi2}|b><a|, with |b> carrying the bright-state amplitudes
    h = c[:, None, None] * np.outer(bright, anc)[None]
    h = h + dagger(h)
    if s.detuning:
        h = h + s.detuning * (np.outer(bright, bright.conj()) - np.outer(anc, anc))[None]
    if delta:
        h = h + delta * SZ1[None]
    return h


def _effective_generators(hfunc, t0: float, dt: float, n: int, order: int) -> np.ndarray:
    starts = t0 + dt * np.arange(n)
    if order == 2:
        return hfunc(starts + 0.5 * dt)
    h1 = hfunc(starts + (0.5 - _GAUSS) * dt)
    h2 = hfunc(starts + (0.5 + _GAUSS) * dt)
    comm = h2 @ h1 - h1 @ h2
    return 0.5 * (h1 + h2) - 1j * (math.sqrt(3.0) / 12.0) * dt * comm


def step_unitaries(hfunc, t0: float, duration: float, n: int, order: int = 4) -> np.ndarray:
    """Per-step propagators over ``[t0, t0 + duration]`` split into ``n`` steps."""
    if n < 1:
        raise ValueError("step policy produced zero steps")
    dt = duration / n
    heff = _effective_generators(hfunc, t0, dt, n, order)
    heff = 0.5 * (heff + dagger(heff))
    return expm_hermitian(heff, -1j * dt)


def propagate_hamiltonian(
    hfunc: Callable[[np.ndarray], np.ndarray],
    t0: float,
    t1: float,
    n_steps: int,
    order: int = 4,
) -> np.ndarray:
    """Total propagator of an arbitrary vectorised ``H(t)`` over ``[t0, t1]``."""
    return ordered_product(step_unitaries(hfunc, t0, t1 - t0, n_steps, order))


def _schedule_steps(s, dims, policy, delta=0.0, amp_scale=1.0):
    hfunc = lambda tt: schedule_hamiltonians(s, tt, dims, delta, amp_scale)
    for t0, dur, n in segment_grids(s, policy.max_phase):
        yield t0, dur, n, step_unitaries(hfunc, t0, dur, n, policy.order)


def schedule_unitary(
    s: PulseSchedule,
    dims: int = 3,
    policy: StepPolicy = StepPolicy(),
    delta: float = 0.0,
    amp_scale: float = 1.0,
) -> np.ndarray:
    """Final propagator only (no path), the fast route for scans and Monte Carlo."""
    u = np.eye(dims, dtype=complex)
    for _, _, _, us in _schedule_steps(s, dims, policy, delta, amp_scale):
        u = ordered_product(us) @ u
    return u


def propagate_unitary(
    s: PulseSchedule,
    dims: int = 3,
    policy: StepPolicy = StepPolicy(),
    delta: float = 0.0,
    amp_scale: float = 1.0,
) -> TrajectoryResult:
    """Unitary trajectory sampled at every step end."""
    times = [0.0]
    path = [np.eye(dims, dtype=complex)]
    for t0, dur, n, us in _schedule_steps(s, dims, policy, delta, amp_scale):
        dt = dur / n
        u = path[-1]
        for k in range(n):
            u = us[k] @ u
            path.append(u)
            times.append(t0 + (k + 1) * dt)
    tr = TrajectoryResult(np.array(times), np.array(path), dims, s.frame)
    if dims in (3, 9):
        tr.leakage_final = leakage(tr)
    return tr


# -- qubit block and leakage ------------------------------------------------


def embed_pair(u2: np.ndarray, frame: BrightFrame) -> np.ndarray:
    """Lift a {b, a} operator to the 3-level space, acting as identity on |d>."""
    b, d, a = frame.embed3()
    basis = np.stack([b, a], axis=1)  # 3x2
    return np.outer(d, d.conj()) + basis @ u2 @ basis.conj().T


def qubit_block(u: np.ndarray, dims: int = 3, frame: BrightFrame | None = None) -> np.ndarray:
    """2x2 (or 4x4 for dims 9) block in qubit order |0>, |1>."""
    if dims == 2:
        if frame is None:
            raise ValueError("dims=2 needs the bright frame to rebuild the qubit block")
        u = embed_pair(u, frame)
        dims = 3
    if dims == 3:
        idx = list(QUBIT_IDX3)
    elif dims == 9:
        idx = hybrid_qubit_indices()
    else:
        raise ValueError(f"no qubit block for dims={dims}")
    return u[np.ix_(idx, idx)]


def hybrid_qubit_indices() -> list[int]:
    """Rows of |e n> for e, n in (0, 1): electron-major, qubit |0> = m=-1, |1> = m=+1."""
    m = {0: -1, 1: +1}
    return [hybrid_index(m[e], m[n]) for e in (0, 1) for n in (0, 1)]


def _probe_inputs(k: int) -> list[np.ndarray]:
    """Computational states plus the two equal superpositions of each neighbour pair."""
    eye = np.eye(k, dtype=complex)
    out = [eye[i] for i in range(k)]
    for i in range(k - 1):
        out.append((eye[i] + eye[i + 1]) / math.sqrt(2.0))
        out.append((eye[i] - eye[i + 1]) / math.sqrt(2.0))
    return out


def leakage(tr: TrajectoryResult) -> float:
    """Worst-case population left outside the qubit subspace at the final time."""
    if tr.dims == 2:
        raise ValueError("leakage is not defined for the two-level {b, a} model")
    if tr.dims == 3:
        idx = list(QUBIT_IDX3)
    elif tr.dims == 9:
        idx = hybrid_qubit_indices()
    else:
        raise ValueError(f"unsupported dims {tr.dims}")
    final = tr.final
    worst = 0.0
    for v in _probe_inputs(len(idx)):
        psi = np.zeros(tr.dims, complex)
        psi[idx] = v
        if tr.kind == "unitary":
            out = np.abs(final @ psi) ** 2
        else:
            raise ValueError("leakage needs a unitary trajectory")
        worst = max(worst, float(1.0 - out[idx].sum()))
    return min(max(worst, 0.0), 1.0)


def trajectory_csv(tr: TrajectoryResult, psi0: np.ndarray, stride: int = 1) -> str:
    """``t_us, p_0..p_{d-1}, leakage`` for a pure input state."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = tr.dims
    if d == 3:
        labels = ["p_one", "p_anc", "p_zero"]
        idx = list(QUBIT_IDX3)
    elif d == 2:
        labels = ["p_bright", "p_anc"]
        idx = [0]
    else:
        labels = [f"p_{k}" for k in range(d)]
        idx = hybrid_qubit_indices()
    w.writerow(["t_us", *labels, "leakage"])
    for k in range(0, len(tr.times), stride):
        pop = np.abs(tr.states[k] @ psi0) ** 2
        leak = 1.0 - pop[idx].sum() if d != 2 else pop[1]
        w.writerow([f"{x:.12g}" for x in (tr.times[k], *pop, leak)])
    return buf.getvalue()


# -- Lindblad --------------------------------------------------------------


def dephasing_operators(dims: int, noise: NoiseModel) -> list[np.ndarray]:
    """``sqrt(rate) * Z``-type jump operators, one per spin."""
    ge, gn = noise.dephasing_rate_e, noise.dephasing_rate_n
    if dims == 2:
        ops = [math.sqrt(ge) * SIGMA_Z]
    elif dims == 3:
        ops = [math.sqrt(ge) * SZ1]
    elif dims == 4:
        eye = np.eye(2)
        ops = [math.sqrt(ge) * kron(SIGMA_Z, eye), math.sqrt(gn) * kron(eye, SIGMA_Z)]
    elif dims == 9:
        ops = [math.sqrt(ge) * kron(SZ1, I3), math.sqrt(gn) * kron(I3, SZ1)]
    else:
        raise ValueError(f"no dephasing model for dims={dims}")
    return [op for op in ops if np.any(op)]


def _kron2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product over the last two axes, broadcasting leading ones."""
    a, b = np.asarray(a), np.asarray(b)
    out = np.einsum("...ij,...kl->...ikjl", a, b)
    m, n = a.shape[-2] * b.shape[-2], a.shape[-1] * b.shape[-1]
    return out.reshape(out.shape[:-4] + (m, n))


def liouvillian(h: np.ndarray, jumps: Sequence[np.ndarray]) -> np.ndarray:
    """Column-stacking superoperator of ``-i[H, .] + sum D[L]``; ``h`` may be stacked."""
    d = h.shape[-1]
    eye = np.eye(d)
    lv = -1j * (_kron2(eye, h) - _kron2(np.swapaxes(h, -1, -2), eye))
    for op in jumps:
        ld = op.conj().T @ op
        lv = lv + np.kron(op.conj(), op) - 0.5 * np.kron(eye, ld) - 0.5 * np.kron(ld.T, eye)
    return lv


def validate_density(rho: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got {rho.shape}")
    if np.linalg.norm(rho - rho.conj().T) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise ValueError(f"density matrix trace is {np.trace(rho).real:.3g}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValueError("density matrix has negative eigenvalues")
    return rho


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape(d, d, order="F")


def propagate_master(
    rho0: np.ndarray,
    s: PulseSchedule,
    noise: NoiseModel = NoiseModel(),
    dims: int = 3,
    policy: StepPolicy = StepPolicy(),
) -> TrajectoryResult:
    """Integrate the Lindblad equation with dephasing on each spin."""
    rho0 = validate_density(rho0)
    if rho0.shape[0] != dims:
        raise ValueError(f"rho0 has dimension {rho0.shape[0]}, expected {dims}")
    jumps = dephasing_operators(dims, noise)
    hfunc = lambda tt: schedule_hamiltonians(s, tt, dims)
    times = [0.0]
    states = [rho0]
    v = vec(rho0)
    for t0, dur, n in segment_grids(s, policy.max_phase):
        dt = dur / n
        starts = t0 + dt * np.arange(n)
        if policy.order == 2:
            gens = liouvillian(hfunc(starts + 0.5 * dt), jumps)
        else:
            l1 = liouvillian(hfunc(starts + (0.5 - _GAUSS) * dt), jumps)
            l2 = liouvillian(hfunc(starts + (0.5 + _GAUSS) * dt), jumps)
            gens = 0.5 * (l1 + l2) + (math.sqrt(3.0) / 12.0) * dt * (l2 @ l1 - l1 @ l2)
        props = scipy.linalg.expm(dt * gens)
        for k in range(n):
            v = props[k] @ v
            rho = unvec(v, dims)
            states.append(0.5 * (rho + rho.conj().T))
            times.append(t0 + (k + 1) * dt)
    return TrajectoryResult(np.array(times), np.array(states), dims, s.frame, kind="density")


def dephase_idle(rho: np.ndarray, duration: float, noise: NoiseModel, dims: int) -> np.ndarray:
    """Exact pure-dephasing channel for a diagonal jump set over ``duration``."""
    if duration <= 0:
        return rho
    jumps = dephasing_operators(dims, noise)
    if not jumps:
        return rho
    rate = np.zeros((dims, dims))
    for op in jumps:
        z = np.real(np.diag(op))
        rate += 0.5 * (z[:, None] - z[None, :]) ** 2
    return rho * np.exp(-rate * duration)


def depolarize(rho: np.ndarray, p: float) -> np.ndarray:
    """``(1 - p) rho + p I/d``."""
    d = rho.shape[0]
    return (1.0 - p) * rho + p * np.trace(rho) * np.eye(d) / d


# -- Monte Carlo -----------------------------------------------------------


def unitary_superop(u: np.ndarray) -> np.ndarray:
    """Column-stacking superoperator of ``rho -> u rho u^+`` (works for non-unitary blocks)."""
    return np.kron(u.conj(), u)


@dataclass
class MonteCarloResult:
    superop: np.ndarray  # mean qubit-block superoperator
    superop_var: np.ndarray  # element-wise variance (real and imaginary parts summed)
    fidelities: np.ndarray  # per-shot average gate fidelity against the ideal run
    n_shots: int
    seed: int

    @property
    def fidelity_mean(self) -> float:
        return float(np.mean(self.fidelities))

    @property
    def fidelity_var(self) -> float:
        return float(np.var(self.fidelities))


def shot_rng(seed: int, shot: int) -> np.random.Generator:
    """Independent, order-free random stream for one shot."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(shot,)))


def monte_carlo(
    s: PulseSchedule,
    noise: NoiseModel,
    n_shots: int,
    seed: int,
    dims: int = 3,
    policy: StepPolicy = StepPolicy(),
    threads: int = 1,
    target: np.ndarray | None = None,
) -> MonteCarloResult:
    """Average the qubit-block channel over quasi-static detuning/amplitude draws."""
    from .gates import gate_fidelity, target_unitary_of

    if n_shots < 1:
        raise ValueError("n_shots must be at least 1")
    tgt = target_unitary_of(s) if target is None else target

    def one(shot: int):
        if noise.quasi_static:
            rng = shot_rng(seed, shot)
            delta = rng.normal(0.0, noise.detuning_sigma) if noise.detuning_sigma else 0.0
            eps = rng.normal(0.0, noise.amplitude_rel_sigma) if noise.amplitude_rel_sigma else 0.0
        else:
            delta, eps = 0.0, 0.0
        u = schedule_unitary(s, dims, policy, delta=delta, amp_scale=1.0 + eps)
        blk = qubit_block(u, dims, s.frame)
        return unitary_superop(blk), gate_fidelity(blk, tgt)

    if noise.quasi_static:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                results = list(ex.map(one, range(n_shots)))
        else:
            results = [one(k) for k in range(n_shots)]
    else:
        r = one(0)
        results = [r] * n_shots
    sops = np.stack([r[0] for r in results])
    fids = np.array([r[1] for r in results])
    mean = sops.mean(axis=0)
    var = sops.real.var(axis=0) + sops.imag.var(axis=0)
    return MonteCarloResult(mean, var, fids, n_shots, seed)


# -- hybrid electron-nuclear register ---------------------------------------


@dataclass(frozen=True)
class ManifoldDrive:
    """A schedule whose two tones are resonant with the electron transitions of one ``m_I``."""

    schedule: PulseSchedule
    m_i: int


def hybrid_interaction_hamiltonians(
    p: SpinSystemParams, drives: Sequence[ManifoldDrive], t: np.ndarray
) -> np.ndarray:
    """Interaction-picture (w.r.t. the diagonal hybrid Hamiltonian) drive terms, RWA per transition.

    Each tone acts on its electron transition in every nuclear manifold; in
    manifolds other than the addressed one it is detuned by the hyperfine
    shift and shows up as an oscillating phase.
    """
    t = np.asarray(t, dtype=float)
    h = np.zeros((len(t), 9, 9), dtype=complex)
    for dr in drives:
        s = dr.schedule
        omega, phase = s.sample(t)
        st, ct = math.sin(s.theta / 2.0), math.cos(s.theta / 2.0)
        # tone 1: |0>=m_s-1 <-> |a>, tone 2: |a> <-> |1>=m_s+1
        for m_s, amp, ph in ((-1, st, s.bright_phase + phase), (+1, ct, phase)):
            carrier = electron_transition(p, m_s, dr.m_i)
            for m_i in (+1, 0, -1):
                det = electron_transition(p, m_s, m_i) - carrier
                c = 0.5 * amp * omega * np.exp(1j * (ph + det * t))
                j, k = hybrid_index(m_s, m_i), hybrid_index(0, m_i)
                h[:, j, k] += c
                h[:, k, j] += np.conj(c)
    return h


def propagate_hybrid(
    p: SpinSystemParams,
    drives: Sequence[ManifoldDrive],
    policy: StepPolicy = StepPolicy(),
) -> np.ndarray:
    """Interaction-picture 9x9 propagator of simultaneous manifold-selective drives."""
    edges = sorted({float(e) for d in drives for e in d.schedule.boundaries})
    if len(edges) < 2:
        return np.eye(9, dtype=complex)
    rate = 2.0 * abs(p.A_hf) + sum(
        max((sg.envelope.peak + abs(sg.phase.rate) for sg in d.schedule.segments), default=0.0)
        for d in drives
    )
    hfunc = lambda tt: hybrid_interaction_hamiltonians(p, drives, tt)
    u = np.eye(9, dtype=complex)
    for t0, t1 in zip(edges[:-1], edges[1:]):
        if t1 - t0 <= 0:
            continue
        n = max(1, int(math.ceil(rate * (t1 - t0) / policy.max_phase)))
        u = propagate_hamiltonian(hfunc, t0, t1, n, policy.order) @ u
    return u
