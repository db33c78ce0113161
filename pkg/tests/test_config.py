import json
import math

import pytest
from hypothesis import given, strategies as st

from bnhqc.config import ConfigError, RunConfig, config_schema, parse_config, parse_gate_text


def write(tmp_path, obj):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return p


def test_defaults():
    c = parse_config()
    assert c.scheme == "bnhqc" and c.gate == "X" and c.seed == 0
    assert math.isclose(c.system.build().D, 2 * math.pi * 2870.0)
    assert c.rabi() is None and c.nhqc_envelope() is None


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError) as e:
        parse_config(write(tmp_path, {"noise": {"t2": 1.0}}))
    assert e.value.errors[0]["key"] == "noise.t2"


def test_bad_values(tmp_path):
    for bad in ({"seed": -1}, {"integrator": {"max_phase": 0.1}}, {"scheme": "grape"}, {"threads": 0}):
        with pytest.raises(ConfigError):
            parse_config(write(tmp_path, bad))
    with pytest.raises(ConfigError):
        parse_config(write(tmp_path, "[1, 2]"))
    with pytest.raises(ConfigError):
        parse_config(write(tmp_path, "{nope"))
    with pytest.raises(FileNotFoundError):
        parse_config(tmp_path / "missing.json")


def test_overrides_take_precedence(tmp_path):
    c = parse_config(write(tmp_path, {"seed": 3, "noise": {"depol_per_gate": 0.1}}), {"seed": 9, "output.dir": "x"})
    assert c.seed == 9 and c.output.dir == "x" and c.noise.depol_per_gate == 0.1


def test_units_at_boundary():
    c = parse_config(None, {"rabi_mhz": 12.5, "noise.detuning_sigma_mhz": 0.2})
    assert math.isclose(c.rabi(), 2 * math.pi * 12.5)
    assert math.isclose(c.noise.build().detuning_sigma, 2 * math.pi * 0.2)


@given(st.floats(0.01, 6.2), st.floats(0, 3.1), st.floats(-3.1, 3.1))
def test_gate_text_roundtrip(g, th, ph):
    c = parse_config(None, {"gate": f"(gamma={g!r}, theta={th!r}, phi={ph!r})"})
    spec = c.gate_spec()
    assert (spec.gamma, spec.theta, spec.phi) == (g, th, ph)


@pytest.mark.parametrize("text", ["H", "(gamma=1)", "(gamma=1,theta=2,psi=3)", "gamma=1,theta=0,phi=0"])
def test_bad_gate_text(text):
    with pytest.raises(ConfigError):
        parse_config(None, {"gate": text})
    with pytest.raises(ValueError):
        parse_gate_text(text)


def test_schema_and_dump_roundtrip():
    assert "properties" in config_schema()
    c = parse_config(None, {"gate": "T", "seed": 4})
    assert RunConfig.model_validate(c.model_dump(mode="json")) == c
