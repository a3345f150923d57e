"""Experiment configuration: a flat INI document with typed, validated keys.

Values are kept in the units written in the file (degrees, dB) so that
serialising and re-parsing reproduces the same object.  Conversions to
radians and linear gains happen once, when the config is parsed, and are
exposed through :attr:`ExperimentConfig.derived`.
"""
from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

SEED_MAX = 2 ** 64 - 1


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


# value kinds ---------------------------------------------------------------------

def _float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(text: str) -> int:
    return int(text, 0)


def _vec3(text: str) -> tuple:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    if len(parts) != 3:
        raise ValueError("expected three comma-separated numbers")
    return tuple(_float(p) for p in parts)


def _float_list(text: str) -> tuple:
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("expected at least one number")
    return tuple(_float(p) for p in parts)


def _str_list(text: str) -> tuple:
    parts = tuple(p.strip() for p in text.split(",") if p.strip())
    if not parts:
        raise ValueError("expected at least one entry")
    return parts


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    check: Optional[Callable[[Any], Optional[str]]] = None


def _positive(v):
    return None if v > 0 else "must be positive"


def _nonneg(v):
    return None if v >= 0 else "must be non-negative"


def _angle_in(v):
    return None if 0 <= v < 90 else "must lie in [0, 90) degrees"


def _above_plate(v):
    return None if v[2] > 0 else "z component must be positive (above the plate)"


def _all_positive(v):
    return None if all(x > 0 for x in v) else "all entries must be positive"


def _kind(v):
    return None if v in ("planar", "cylindrical", "spherical") else \
        "must be planar, cylindrical or spherical"


def _kinds(v):
    bad = [k for k in v if _kind(k)]
    return None if not bad else f"unknown design kind(s) {', '.join(bad)}"


def _seed(v):
    return None if 0 <= v <= SEED_MAX else "must be a 64-bit unsigned integer"


REFERENCE_FOCUS = (0.0, 8.0, 8.0)

SCHEMA: dict[str, dict[str, Key]] = {
    "medium": {
        "wavelength_m": Key(_float, 0.1, _positive),
        "impedance_ohm": Key(_float, 377.0, _positive),
    },
    "aperture": {
        "a_m": Key(_float, 2.0, _positive),
        "b_m": Key(_float, 2.0, _positive),
    },
    "incident": {
        "theta_in_deg": Key(_float, 30.0, _angle_in),
        "e0_v_per_m": Key(_float, None, _positive),
        "tx_power_w": Key(_float, None, _positive),
        "tx_gain_db": Key(_float, 0.0),
        "source_distance_m": Key(_float, 1000.0, _positive),
    },
    "receiver": {
        "num_antennas": Key(_int, 128, lambda v: None if v >= 1 else "must be at least 1"),
        "length_m": Key(_float, 2.0, _nonneg),
        "center_xyz_m": Key(_vec3, REFERENCE_FOCUS, _above_plate),
        "attitude_phi_deg": Key(_float, 0.0),
        "rx_gain_db": Key(_float, 5.0),
    },
    "numerics": {
        "samples_per_wavelength": Key(_float, 8.0, _positive),
        "n_l": Key(_int, 32, lambda v: None if v >= 1 else "must be at least 1"),
    },
    "run": {
        "seed": Key(_int, 1, _seed),
    },
    "design": {
        "kind": Key(str, "cylindrical", _kind),
        "focus_xyz_m": Key(_vec3, REFERENCE_FOCUS, _above_plate),
    },
    "arc": {
        "kinds": Key(_str_list, ("planar", "cylindrical"), _kinds),
        "focus_xyz_m": Key(_vec3, REFERENCE_FOCUS, _above_plate),
        "distance_m": Key(_float, None, _positive),
        "theta_start_deg": Key(_float, 1.0),
        "theta_stop_deg": Key(_float, 89.0),
        "theta_count": Key(_int, 881, lambda v: None if v >= 1 else "must be at least 1"),
    },
    "field_map": {
        "kind": Key(str, "cylindrical", _kind),
        "focus_xyz_m": Key(_vec3, REFERENCE_FOCUS, _above_plate),
        "y_start_m": Key(_float, 0.0),
        "y_stop_m": Key(_float, 16.0),
        "y_count": Key(_int, 81, _positive),
        "z_start_m": Key(_float, 1.0, _positive),
        "z_stop_m": Key(_float, 16.0, _positive),
        "z_count": Key(_int, 76, _positive),
    },
    "capacity": {
        "kinds": Key(_str_list, ("planar", "cylindrical"), _kinds),
        "snr_db": Key(_float_list, (-10.0, 0.0, 10.0, 20.0, 30.0)),
    },
    "location": {
        "kind": Key(str, "cylindrical", _kind),
        "d_start_m": Key(_float, 9.4, _positive),
        "d_stop_m": Key(_float, 30.0, _positive),
        "d_count": Key(_int, 104, _positive),
        "psi_start_deg": Key(_float, 1.0),
        "psi_stop_deg": Key(_float, 89.0),
        "psi_count": Key(_int, 89, _positive),
        "true_d_m": Key(_float, 18.0, _positive),
        "true_psi_deg": Key(_float, 67.0),
        "snr_db": Key(_float, None),
    },
    "attitude": {
        "kinds": Key(_str_list, ("planar", "cylindrical"), _kinds),
        "phi_start_deg": Key(_float, 0.0),
        "phi_stop_deg": Key(_float, 85.0),
        "phi_count": Key(_int, 18, lambda v: None if v >= 2 else "must be at least 2"),
        "true_phi_deg": Key(_float, 20.0),
    },
    "scan": {
        "kind": Key(str, "cylindrical", _kind),
        "center_xyz_m": Key(_vec3, (0.0, 18.0 / math.sqrt(2.0), 18.0 / math.sqrt(2.0)), _above_plate),
        "half_count": Key(_int, 10, _nonneg),
        "spacing_m": Key(_float, 0.005, _positive),
        "true_offset_steps": Key(lambda t: tuple(_int(p) for p in t.split(",")), (0, 0)),
        "snr_db": Key(_float_list, (0.0, 10.0, 20.0)),
        "trials": Key(_int, 200, _positive),
    },
}


def _db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration; ``values[section][key]`` holds document units."""

    values: dict
    derived: dict = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "derived", _derive(self.values))

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        err = _seed(seed)
        if err:
            raise ConfigError("run.seed", err)
        vals = {s: dict(v) for s, v in self.values.items()}
        vals["run"]["seed"] = seed
        return ExperimentConfig(vals)

    def digest(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()

    # physical objects --------------------------------------------------------
    def medium(self):
        from .geometry import Medium
        return Medium(self.values["medium"]["wavelength_m"], self.values["medium"]["impedance_ohm"])

    def aperture(self):
        from .geometry import RisAperture
        return RisAperture(self.values["aperture"]["a_m"], self.values["aperture"]["b_m"])

    def incident_wave(self):
        from .geometry import IncidentWave
        inc = self.values["incident"]
        try:
            return IncidentWave(
                theta_in=self.derived["theta_in"], impedance=self.values["medium"]["impedance_ohm"],
                e0=self.derived["e0"], source_distance=inc["source_distance_m"],
                tx_gain=self.derived["tx_gain"], tx_power=inc["tx_power_w"])
        except ValueError as exc:
            raise ConfigError("incident.tx_power_w", str(exc)) from None

    def receiver(self):
        from .geometry import UlaReceiver
        rx = self.values["receiver"]
        return UlaReceiver(rx["num_antennas"], rx["length_m"], rx["center_xyz_m"],
                           self.derived["attitude_phi"], self.derived["rx_gain"])


def _derive(values: dict) -> dict:
    inc = values["incident"]
    e0 = inc["e0_v_per_m"]
    if e0 is None and inc["tx_power_w"] is None:
        e0 = 1.0
    return {
        "theta_in": math.radians(inc["theta_in_deg"]),
        "e0": e0,
        "tx_gain": _db_to_linear(inc["tx_gain_db"]),
        "rx_gain": _db_to_linear(values["receiver"]["rx_gain_db"]),
        "attitude_phi": math.radians(values["receiver"]["attitude_phi_deg"]),
    }


def default_config() -> ExperimentConfig:
    return parse_config("")


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="\0none")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<document>", str(exc).splitlines()[0]) from None
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(section, "unknown section")
    values: dict = {}
    for section, keys in SCHEMA.items():
        given = dict(parser[section]) if parser.has_section(section) else {}
        for name in given:
            if name not in keys:
                raise ConfigError(f"{section}.{name}", "unknown key")
        out = {}
        for name, spec in keys.items():
            path = f"{section}.{name}"
            if name in given and given[name].strip() != "":
                try:
                    val = spec.parse(given[name].strip())
                except ValueError as exc:
                    raise ConfigError(path, f"cannot parse {given[name]!r} ({exc})") from None
            else:
                val = spec.default
            if val is not None and spec.check is not None:
                err = spec.check(val)
                if err:
                    raise ConfigError(path, err)
            out[name] = val
        values[section] = out
    cfg = ExperimentConfig(values)
    cfg.incident_wave()
    return cfg


def serialize(cfg: ExperimentConfig) -> str:
    """Canonical INI text; ``parse_config(serialize(c)) == c``."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for name in keys:
            val = cfg.values[section][name]
            if val is not None:
                lines.append(f"{name} = {_fmt(val)}")
        lines.append("")
    return "\n".join(lines)
