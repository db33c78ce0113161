"""Strict run configuration.

Frequencies in the JSON file are cyclic MHz; they become rad/us (times 2 pi)
when converted to the physics objects. Unknown keys are rejected.
"""
from __future__ import annotations

import json
import math
import re
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import evolve
from .gates import ALIASES, GateSpec
from .pulses import Envelope
from .spinsys import SpinSystemParams

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    def __init__(self, message: str, errors: list | None = None):
        super().__init__(message)
        self.errors = errors or []


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class SystemConfig(_Strict):
    D_mhz: float = Field(2870.0, gt=0)
    gamma_e_mhz_per_gauss: float = 2.8025
    gamma_n_mhz_per_gauss: float = -3.077e-4
    P_quad_mhz: float = -4.95
    A_hf_mhz: float = 2.16
    B0_gauss: float = Field(510.0, ge=0)

    def build(self) -> SpinSystemParams:
        return SpinSystemParams.from_mhz(**self.model_dump())


class GateConfig(_Strict):
    gamma: float
    theta: float
    phi: float
    name: Optional[str] = None

    def build(self) -> GateSpec:
        return GateSpec(self.gamma, self.theta, self.phi, self.name)


class NoiseConfig(_Strict):
    detuning_sigma_mhz: float = Field(0.0, ge=0)
    amplitude_rel_sigma: float = Field(0.0, ge=0)
    dephasing_rate_e_per_us: float = Field(0.0, ge=0)
    dephasing_rate_n_per_us: float = Field(0.0, ge=0)
    depol_per_gate: float = Field(0.0, ge=0, le=1)

    def build(self) -> evolve.NoiseModel:
        return evolve.NoiseModel(
            detuning_sigma=TWO_PI * self.detuning_sigma_mhz,
            amplitude_rel_sigma=self.amplitude_rel_sigma,
            dephasing_rate_e=self.dephasing_rate_e_per_us,
            dephasing_rate_n=self.dephasing_rate_n_per_us,
            depol_per_gate=self.depol_per_gate,
        )


class IntegratorConfig(_Strict):
    max_phase: float = Field(0.005, gt=0, le=0.05)
    order: Literal[2, 4] = 4

    def build(self) -> evolve.StepPolicy:
        return evolve.StepPolicy(self.max_phase, self.order)


class OutputConfig(_Strict):
    dir: str = "out"
    format: Literal["csv", "json", "both", "json-only"] = "both"

    @property
    def write_csv(self) -> bool:
        return self.format in ("csv", "both")

    @property
    def write_json(self) -> bool:
        return self.format != "csv"


class EvolveConfig(_Strict):
    dims: Literal[2, 3] = 3
    input_state: Literal["0", "1", "+", "-", "+i", "-i"] = "0"
    mc_shots: int = Field(200, ge=1)
    stride: int = Field(1, ge=1)


class QptConfig(_Strict):
    shots: Optional[int] = Field(None, ge=1)
    spam: float = Field(0.0, ge=0, le=1)
    contrast: Optional[float] = Field(None, gt=0, le=1)


class QstConfig(_Strict):
    expectations_file: Optional[str] = None
    readout_sigma: float = Field(0.0, ge=0)


class DecayConfig(_Strict):
    n_max: int = Field(32, ge=3)
    eps_if: float = Field(0.0, ge=0, le=1)
    readout_sigma: float = Field(0.0, ge=0)
    two_qubit: bool = False


class MetrologyConfig(_Strict):
    shots_per_point: int = Field(2000, ge=1)
    n_phases: int = Field(41, ge=5)
    contrast: Optional[float] = Field(None, gt=0, le=1)
    T_a_us: Optional[float] = Field(None, ge=0)
    visibility: float = Field(1.0, ge=0, le=1)


class ScanConfig(_Strict):
    n_slopes: int = Field(51, ge=2)
    slope_span: float = Field(2.5, gt=0)  # in units of Omega
    duration_step_us: float = Field(0.0004, gt=0)
    duration_span: float = Field(0.2, gt=0, lt=1)  # relative half-width of the window around the closed-form estimate
    epsilon: float = Field(1e-6, gt=0, le=1e-3)


class RunConfig(_Strict):
    system: SystemConfig = Field(default_factory=SystemConfig)
    scheme: Literal["nhqc", "bnhqc"] = "bnhqc"
    gate: Union[str, GateConfig] = "X"
    rabi_mhz: Optional[float] = Field(None, gt=0)
    envelope: Literal["gaussian", "constant"] = "gaussian"
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    seed: int = Field(0, ge=0)
    threads: int = Field(1, ge=1)
    evolve: EvolveConfig = Field(default_factory=EvolveConfig)
    qpt: QptConfig = Field(default_factory=QptConfig)
    qst: QstConfig = Field(default_factory=QstConfig)
    decay: DecayConfig = Field(default_factory=DecayConfig)
    metrology: MetrologyConfig = Field(default_factory=MetrologyConfig)
    scan: ScanConfig = Field(default_factory=ScanConfig)

    @field_validator("gate", mode="before")
    @classmethod
    def _parse_gate(cls, v):
        if isinstance(v, str):
            return parse_gate_text(v)
        return v

    def gate_spec(self) -> GateSpec:
        if isinstance(self.gate, str):
            return GateSpec.named(self.gate)
        return self.gate.build()

    def rabi(self) -> float | None:
        return None if self.rabi_mhz is None else TWO_PI * self.rabi_mhz

    def nhqc_envelope(self) -> Envelope | None:
        """Envelope for NHQC schedules; ``None`` keeps the package default."""
        if self.rabi_mhz is None:
            return None if self.envelope == "gaussian" else Envelope("constant", TWO_PI * 12.76)
        return Envelope(self.envelope, TWO_PI * self.rabi_mhz)


_GATE_RE = re.compile(r"^\(\s*(.*?)\s*\)$")


def parse_gate_text(text: str):
    """Alias name, or ``(gamma=..,theta=..,phi=..)`` in radians."""
    t = text.strip()
    if t in ALIASES:
        return t
    m = _GATE_RE.match(t)
    if not m:
        raise ValueError(f"gate must be one of {sorted(ALIASES)} or '(gamma=..,theta=..,phi=..)', got {text!r}")
    vals = {}
    for part in m.group(1).split(","):
        if "=" not in part:
            raise ValueError(f"malformed gate component {part!r}")
        k, v = (s.strip() for s in part.split("=", 1))
        if k not in ("gamma", "theta", "phi"):
            raise ValueError(f"unknown gate component {k!r}")
        vals[k] = float(v)
    missing = {"gamma", "theta", "phi"} - set(vals)
    if missing:
        raise ValueError(f"gate is missing {sorted(missing)}")
    return vals


def _format_errors(err: ValidationError) -> tuple[str, list]:
    items = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"])
        items.append({"key": loc, "problem": e["msg"], "input": repr(e.get("input"))[:80]})
    msg = "; ".join(f"{i['key']}: {i['problem']}" for i in items)
    return msg, items


def parse_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Load, merge overrides (dotted keys allowed), validate."""
    data: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"config file not found: {p}")
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
    for key, val in (overrides or {}).items():
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = val
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        msg, items = _format_errors(exc)
        raise ConfigError(msg, items) from None


def config_schema() -> dict:
    return RunConfig.model_json_schema()
