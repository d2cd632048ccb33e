"""Run configuration: YAML documents validated against a JSON schema.

Physical inputs are in ordinary units (Hz, s, m, W, Gauss); conversion to
angular frequencies happens in :func:`build`.
"""

from __future__ import annotations

import copy
import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np
import yaml

from .constants import ATOMIC_MASS, TWO_PI
from .crystal import TrapConfig, beam_wavevectors, lamb_dicke, normal_modes, phase_matched_positions
from .errors import AtomicRates
from .evolve import GateSetup
from .hamiltonian import BeamPair, LevelScheme
from .pulse import make_schedule

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """Schema violation; ``path`` names the offending key."""

    def __init__(self, msg, path=""):
        super().__init__(f"{path or '<root>'}: {msg}")
        self.path = path


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props, "required": list(required)}


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_int = {"type": "integer", "minimum": 0}
_nullable_num = {"type": ["number", "null"]}

SCHEMA = _obj(
    {
        "version": {"const": CONFIG_VERSION},
        "seed": _int,
        "trap": _obj({
            "axial_hz": _pos, "radial_y_hz": _pos, "radial_z_hz": _pos,
            "mass_amu": _pos, "ion_count": {"const": 2}, "magnetic_field_gauss": _pos,
        }),
        "beams": _obj({
            "g_hz": _nonneg,
            "wavelength_m": _pos,
            "geometry": {"enum": ["orthogonal", "counter"]},
            "delta_k_per_m": {"type": ["array", "null"], "items": _num, "minItems": 3, "maxItems": 3},
            "phase_a_rad": _num, "phase_b_rad": _num,
            "coupling_phases_rad": {"type": "array", "items": _num, "minItems": 4, "maxItems": 4},
            "e0_leak_rabi_hz": _nonneg,
            "phase_match_spacing": {"type": "boolean"},
        }),
        "scheme": _obj({
            "include_e0": {"type": "boolean"},
            "stark_offset_hz": _num,
            "qubit_shift_hz": _num,
        }),
        "schedule": _obj({
            "loops": {"type": "integer", "minimum": 1},
            "t_loop_s": _pos, "t_pi_s": _nonneg,
            "shape": {"enum": ["square", "sin2"]},
            "ramp_s": _nonneg,
            "echo": {"type": "boolean"},
            "detuning_sign": {"enum": [-1, 1]},
            "microwave": {"enum": ["ideal", "finite"]},
            "microwave_error": _nonneg,
            "envelope_mode": {"enum": ["field", "intensity"]},
        }),
        "truncations": _obj({
            "gate": {"type": "integer", "minimum": 1},
            "spectator": _int,
            "max_dimension": {"type": "integer", "minimum": 1},
        }),
        "simulation": _obj({
            "tier": {"enum": ["full", "lightshift", "sdf"]},
            "tol": _pos,
            "calibrate": {"type": "boolean"},
            "amplitude": _nullable_num,
            "frame": {"enum": ["raw", "optimized"]},
            "nbar": _nonneg,
            "samples": {"type": "integer", "minimum": 2},
            "filter_window_s": _nullable_num,
        }),
        "errors": _obj({
            "d_lifetime_s": _pos,
            "p_linewidth_hz": _pos,
            "p_detuning_hz": _pos,
            "eps_min": _pos,
            "reference_power_w": _pos,
            "off_resonant": _nullable_num,
            "leakage_rate": _nonneg,
            "leakage_spontaneous_fraction": {"type": "number", "minimum": 0, "maximum": 1},
            "eps_ramsey": {"type": "number", "minimum": 0, "maximum": 1},
            "kappa_gate": _nonneg,
            "kappa_com": _nonneg,
            "p_com": _nullable_num,
            "microwave_error": _nonneg,
            "microwave_pulses": _int,
        }),
        "srb": _obj({
            "lengths": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
            "n_seq": {"type": "integer", "minimum": 1},
            "shots": _int,
            "clifford_error": _nonneg,
            "ls_error": _nonneg,
            "single_qubit_error": _nonneg,
            "ls_channel": {"enum": ["depolarizing", "simulated"]},
            "fixed_asymptote": {"type": "boolean"},
        }),
        "output": _obj({"dir": {"type": "string"}}),
    }
)


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent-only floats such as ``1e6``."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?(?:[eE][-+]?[0-9]+)$|^[-+]?\.[0-9_]+(?:[eE][-+]?[0-9]+)?$"),
    list("-+0123456789."),
)


def parse_yaml(text: str):
    return yaml.load(text, Loader=_Loader)


def load_preset(name: str = "paper_defaults") -> dict:
    text = resources.files("lsgate").joinpath(f"presets/{name}.yaml").read_text()
    return parse_yaml(text)


def validate(doc: dict) -> None:
    """Raise :class:`ConfigError` naming the first offending path."""
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = ".".join(str(p) for p in e.absolute_path)
        if e.validator == "additionalProperties":
            extra = [k for k in e.instance if k not in e.schema.get("properties", {})]
            path = ".".join([path, extra[0]] if path else [extra[0]])
            raise ConfigError("unknown key", path)
        raise ConfigError(e.message, path)


def merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(item: str) -> tuple[list[str], object]:
    """``"schedule.loops=3"`` -> (["schedule", "loops"], 3), values parsed as YAML."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, val = item.split("=", 1)
    return key.strip().split("."), parse_yaml(val)


def set_path(doc: dict, path: list[str], value) -> dict:
    out = copy.deepcopy(doc)
    node = out
    for p in path[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError("not a section", ".".join(path))
    node[path[-1]] = value
    return out


def get_path(doc: dict, path: list[str]):
    node = doc
    for p in path:
        if not isinstance(node, dict) or p not in node:
            raise ConfigError("no such key", ".".join(path))
        node = node[p]
    return node


def load_config(path: str | None = None, overrides=()) -> dict:
    """Preset merged with the user document and ``key=value`` overrides, validated."""
    doc = load_preset()
    if path:
        with open(path) as fh:
            user = parse_yaml(fh.read()) or {}
        if not isinstance(user, dict):
            raise ConfigError("document must be a mapping")
        validate(user)
        doc = merge(doc, user)
    for item in overrides:
        keys, val = parse_override(item)
        doc = set_path(doc, keys, val)
    validate(doc)
    return doc


def dump_config(doc: dict) -> str:
    return yaml.safe_dump(doc, sort_keys=False)


def config_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


# --- building physical objects --------------------------------------------


@dataclass
class Built:
    """Physical objects derived from one configuration document."""

    doc: dict
    trap: TrapConfig
    spectrum: object
    setup: GateSetup
    schedule: object
    eta_gate: float

    @property
    def beams(self) -> BeamPair:
        return self.setup.beams

    @property
    def scheme(self) -> LevelScheme:
        return self.setup.scheme


def build(doc: dict) -> Built:
    t, b, s, sc = doc["trap"], doc["beams"], doc["scheme"], doc["schedule"]
    trap = TrapConfig(t["axial_hz"], t["radial_y_hz"], t["radial_z_hz"], t["mass_amu"] * ATOMIC_MASS,
                      t.get("ion_count", 2), t["magnetic_field_gauss"])
    spectrum = normal_modes(trap)
    if b.get("delta_k_per_m") is not None:
        dk = np.asarray(b["delta_k_per_m"], dtype=float)
        k_a, k_b = dk / 2, -dk / 2
    else:
        k_a, k_b = beam_wavevectors(b["wavelength_m"], b["geometry"])
    schedule = make_schedule(sc["loops"], sc["t_loop_s"], sc["t_pi_s"], sc["echo"], shape=sc["shape"],
                             ramp=sc["ramp_s"], detuning_sign=sc["detuning_sign"], microwave=sc["microwave"],
                             microwave_error=sc["microwave_error"])
    mu = spectrum.gate_mode.frequency + schedule.signed_delta
    g = TWO_PI * b["g_hz"]
    beams = BeamPair(g, g, mu, k_a, k_b, b["phase_a_rad"], b["phase_b_rad"], tuple(b["coupling_phases_rad"]),
                     TWO_PI * b["e0_leak_rabi_hz"])
    delta_k = beams.delta_k
    positions = phase_matched_positions(spectrum, delta_k) if b["phase_match_spacing"] else None
    scheme = LevelScheme.from_field(t["magnetic_field_gauss"], include_e0=s["include_e0"],
                                    qubit_shift=TWO_PI * (s["qubit_shift_hz"] + s["stark_offset_hz"]))
    setup = GateSetup(spectrum, beams, scheme, positions, doc["truncations"]["max_dimension"])
    eta = lamb_dicke(spectrum, delta_k).gate
    return Built(doc, trap, spectrum, setup, schedule, eta)


def model_for(built: Built, tier: str | None = None, spectators=("x_com",)):
    tier = tier or built.doc["simulation"]["tier"]
    tr = built.doc["truncations"]
    gate = built.spectrum.gate_mode.name
    modes = {gate: tr["gate"], **{m: tr["spectator"] for m in spectators}}
    if tier == "sdf":
        return built.setup.sdf(tr["gate"])
    if tier == "lightshift":
        return built.setup.lightshift(modes)
    return built.setup.full(modes)


def budget_inputs(built: Built, off_resonant: float | None = None, p_com: float | None = None) -> dict:
    e = built.doc["errors"]
    omega = built.beams.g_a**2 / built.scheme.delta
    return {
        "gamma_d": 1.0 / e["d_lifetime_s"],
        "delta": built.scheme.delta,
        "loops": built.schedule.loops,
        "eta": built.eta_gate,
        "omega": omega,
        "t_gate": built.schedule.gate_time,
        "eps_min": e["eps_min"],
        "off_resonant": off_resonant if off_resonant is not None else e["off_resonant"],
        "leakage_rate": e["leakage_rate"],
        "leakage_spontaneous_fraction": e["leakage_spontaneous_fraction"],
        "eps_ramsey": e["eps_ramsey"],
        "g": built.beams.g_a,
        "kappa_gate": e["kappa_gate"],
        "kappa_com": e["kappa_com"],
        "p_com": p_com if p_com is not None else e["p_com"],
        "microwave_error": e["microwave_error"],
        "microwave_pulses": e["microwave_pulses"],
        "reference_power": e["reference_power_w"],
    }


def atomic_rates(doc: dict) -> AtomicRates:
    e = doc["errors"]
    return AtomicRates(1.0 / e["d_lifetime_s"], TWO_PI * e["p_linewidth_hz"], TWO_PI * e["p_detuning_hz"])
