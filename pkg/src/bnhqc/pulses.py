"""Pulse schedules for orange-slice (NHQC) and brachistochrone (B-NHQC) loops.

A schedule is a list of segments, each with an amplitude envelope
``Omega(t)`` and a drive-phase program ``phi2(t)`` on local segment time.
The schedule also carries the target gate ``(gamma, theta, phi)``: rotation
angle ``gamma`` about the axis ``(sin theta cos phi, sin theta sin phi, cos theta)``.

The bright state used to build the drive has phase ``pi - phi`` rather than
``phi``. With ``|b> = e^{i phi_b} sin(theta/2)|0> + cos(theta/2)|1>`` the loop
gives ``|d><d| + e^{i gamma}|b><b|``, which equals the target rotation only
when ``|b>`` is the -1 eigenvector of ``n.sigma``; that fixes ``phi_b = pi - phi``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np
from scipy import integrate
from scipy.special import erf

from .spinsys import BrightFrame

TWO_PI = 2.0 * math.pi
_E2 = math.exp(-2.0)


class DomainError(ValueError):
    pass


def gaussian_fill_factor(baseline_subtract: bool = True) -> float:
    """Mean of a 4-sigma truncated Gaussian envelope relative to its peak."""
    g = math.sqrt(2.0 * math.pi) * erf(math.sqrt(2.0)) / 4.0
    if not baseline_subtract:
        return g
    return (g - _E2) / (1.0 - _E2)


@dataclass(frozen=True)
class Envelope:
    kind: str = "constant"  # "constant" | "gaussian"
    peak: float = 0.0
    sigma: float | None = None
    baseline_subtract: bool = True

    def __post_init__(self):
        if self.kind not in ("constant", "gaussian"):
            raise ValueError(f"unknown envelope kind {self.kind!r}")
        if self.peak < 0:
            raise ValueError("envelope peak must be non-negative")
        if self.kind == "gaussian" and self.sigma is not None and self.sigma <= 0:
            raise ValueError("gaussian sigma must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full_like(t, self.peak)
        s = self.sigma
        g = np.exp(-((t - 2.0 * s) ** 2) / (2.0 * s * s))
        if self.baseline_subtract:
            g = (g - _E2) / (1.0 - _E2)
        return np.where((t >= 0) & (t <= 4.0 * s), self.peak * g, 0.0)

    def derivative(self, t):
        """Analytic ``dOmega/dt`` inside the support."""
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.zeros_like(t)
        s = self.sigma
        g = np.exp(-((t - 2.0 * s) ** 2) / (2.0 * s * s)) * (-(t - 2.0 * s) / (s * s))
        if self.baseline_subtract:
            g = g / (1.0 - _E2)
        return np.where((t >= 0) & (t <= 4.0 * s), self.peak * g, 0.0)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "peak_rad_per_us": self.peak}
        if self.kind == "gaussian":
            d["sigma_us"] = self.sigma
            d["baseline_subtract"] = self.baseline_subtract
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Envelope":
        return cls(
            kind=d["kind"],
            peak=float(d["peak_rad_per_us"]),
            sigma=d.get("sigma_us"),
            baseline_subtract=bool(d.get("baseline_subtract", True)),
        )


@dataclass(frozen=True)
class PhaseProgram:
    kind: str = "constant"  # "constant" | "linear"
    slope: float = 0.0
    intercept: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full_like(t, self.intercept)
        return self.intercept + self.slope * t

    @property
    def rate(self) -> float:
        return self.slope if self.kind == "linear" else 0.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "slope_rad_per_us": self.rate, "intercept_rad": self.intercept}

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseProgram":
        return cls(d["kind"], float(d.get("slope_rad_per_us", 0.0)), float(d["intercept_rad"]))


@dataclass(frozen=True)
class Segment:
    duration: float
    envelope: Envelope
    phase: PhaseProgram = field(default_factory=PhaseProgram)

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"segment duration must be positive, got {self.duration}")


@dataclass(frozen=True)
class PulseSchedule:
    segments: tuple[Segment, ...]
    theta: float
    phi: float
    gamma: float
    scheme: str = "custom"
    detuning: float = 0.0  # static sigma_z term in the {b, a} frame, rad/us

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @property
    def boundaries(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])

    @property
    def bright_phase(self) -> float:
        return math.pi - self.phi

    @property
    def frame(self) -> BrightFrame:
        return BrightFrame(self.theta, self.bright_phase)

    def sample(self, t) -> tuple[np.ndarray, np.ndarray]:
        """``(Omega(t), phi2(t))`` on absolute schedule time; right-continuous at joins."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        omega = np.zeros_like(t)
        phase = np.zeros_like(t)
        if not self.segments:
            return omega, phase
        edges = self.boundaries
        idx = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, len(self.segments) - 1)
        for k, seg in enumerate(self.segments):
            m = idx == k
            if m.any():
                local = t[m] - edges[k]
                omega[m] = seg.envelope(local)
                phase[m] = seg.phase(local)
        outside = (t < 0.0) | (t > edges[-1] * (1.0 + 1e-14))
        omega[outside] = 0.0
        return omega, phase

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "gamma": self.gamma,
            "theta": self.theta,
            "phi": self.phi,
            "detuning_rad_per_us": self.detuning,
            "duration_us": self.duration,
            "segments": [
                {
                    "duration_us": s.duration,
                    "envelope": s.envelope.to_dict(),
                    "phase": s.phase.to_dict(),
                }
                for s in self.segments
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PulseSchedule":
        segs = tuple(
            Segment(
                float(s["duration_us"]),
                Envelope.from_dict(s["envelope"]),
                PhaseProgram.from_dict(s["phase"]),
            )
            for s in d["segments"]
        )
        return cls(
            segs,
            float(d["theta"]),
            float(d["phi"]),
            float(d["gamma"]),
            d.get("scheme", "custom"),
            float(d.get("detuning_rad_per_us", 0.0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self, sample_rate: float = 1000.0) -> str:
        """Sampled ``(t_us, omega_rad_per_us, phi2_rad)`` at ``sample_rate`` points per us."""
        n = max(2, int(math.ceil(self.duration * sample_rate)) + 1)
        t = np.linspace(0.0, self.duration, n)
        omega, phase = self.sample(t)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_us", "omega_rad_per_us", "phi2_rad"])
        for row in zip(t, omega, phase):
            w.writerow([f"{x:.12g}" for x in row])
        return buf.getvalue()


def identity_schedule(theta: float = 0.0, phi: float = 0.0, scheme: str = "custom") -> PulseSchedule:
    return PulseSchedule((), theta, phi, 0.0, scheme)


def tau_min(gamma: float, omega: float) -> float:
    """Shortest loop duration for geometric phase ``gamma`` at Rabi frequency ``omega``."""
    if not 0.0 < gamma < TWO_PI:
        raise DomainError(f"gamma must lie in (0, 2pi), got {gamma}")
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega}")
    # pi^2 - (pi - gamma)^2 written as a product to stay exact at gamma = pi
    return 2.0 * math.sqrt(gamma * (TWO_PI - gamma)) / omega


def make_bnhqc(gamma: float, theta: float, phi: float, omega: float) -> PulseSchedule:
    """Single constant-amplitude segment with a linear phase ramp ``2(gamma-pi)t/tau``."""
    if gamma in (0.0, TWO_PI):
        warnings.warn("gamma is 0 or 2pi: returning a zero-duration identity schedule")
        return identity_schedule(theta, phi, "bnhqc")
    tau = tau_min(gamma, omega)
    seg = Segment(tau, Envelope("constant", omega), PhaseProgram("linear", 2.0 * (gamma - math.pi) / tau, 0.0))
    return PulseSchedule((seg,), theta, phi, gamma, "bnhqc")


def nhqc_segment_duration(envelope: Envelope) -> float:
    """Segment length that gives pulse area pi for the envelope's peak."""
    if not envelope.peak > 0:
        raise DomainError("envelope peak must be positive")
    if envelope.kind == "constant":
        return math.pi / envelope.peak
    return math.pi / (envelope.peak * gaussian_fill_factor(envelope.baseline_subtract))


def make_nhqc(gamma: float, theta: float, phi: float, envelope: Envelope) -> PulseSchedule:
    """Two pi-area segments; the second one shifted in drive phase by ``pi + gamma``."""
    t_seg = nhqc_segment_duration(envelope)
    env = envelope
    if envelope.kind == "gaussian":
        env = replace(envelope, sigma=t_seg / 4.0)
    segs = (
        Segment(t_seg, env, PhaseProgram("constant", 0.0, 0.0)),
        Segment(t_seg, env, PhaseProgram("constant", 0.0, math.pi + gamma)),
    )
    return PulseSchedule(segs, theta, phi, gamma, "nhqc")


def linear_ramp_schedule(
    gamma: float, theta: float, phi: float, omega: float, slope: float, duration: float
) -> PulseSchedule:
    seg = Segment(duration, Envelope("constant", omega), PhaseProgram("linear", slope, 0.0))
    return PulseSchedule((seg,), theta, phi, gamma, "custom")


def two_tone(s: PulseSchedule, t: float) -> tuple[float, float, float, float]:
    """Per-transition drive ``(Omega1, Omega2, phi1, phi2)`` at time ``t``."""
    omega, phase = s.sample([t])
    om, ph = float(omega[0]), float(phase[0])
    return (
        om * math.sin(s.theta / 2.0),
        om * math.cos(s.theta / 2.0),
        s.bright_phase + ph,
        ph,
    )


def from_two_tone(omega1: float, omega2: float, phi1: float, phi2: float) -> tuple[float, float, float]:
    """Inverse of :func:`two_tone`: ``(Omega, theta, phi)`` with ``phi`` wrapped to (-pi, pi]."""
    omega = math.hypot(omega1, omega2)
    theta = 2.0 * math.atan2(omega1, omega2)
    phi = math.pi - (phi1 - phi2)
    phi = math.atan2(math.sin(phi), math.cos(phi))
    return omega, theta, phi


def area(s: PulseSchedule) -> float:
    """Integrated pulse area over all segments by adaptive quadrature."""
    total = 0.0
    for seg in s.segments:
        if seg.envelope.kind == "constant":
            total += seg.envelope.peak * seg.duration
            continue
        val, _ = integrate.quad(lambda x: float(seg.envelope(x)), 0.0, seg.duration, epsabs=0.0, epsrel=1e-12, limit=200)
        total += val
    return total


def truncate(s: PulseSchedule, t_end: float) -> PulseSchedule:
    """The first ``t_end`` microseconds of a schedule (envelopes keep their shape)."""
    segs = []
    elapsed = 0.0
    for seg in s.segments:
        if elapsed >= t_end:
            break
        d = min(seg.duration, t_end - elapsed)
        segs.append(replace(seg, duration=d))
        elapsed += seg.duration
    return replace(s, segments=tuple(segs))


def segment_grids(s: PulseSchedule, max_phase: float) -> Iterable[tuple[float, float, int]]:
    """Per-segment ``(t_start, duration, n_steps)`` honouring ``rate * dt <= max_phase``."""
    edges = s.boundaries
    for k, seg in enumerate(s.segments):
        rate = seg.envelope.peak + abs(seg.phase.rate) + 2.0 * abs(s.detuning)
        n = max(1, int(math.ceil(rate * seg.duration / max_phase)))
        yield float(edges[k]), seg.duration, n
