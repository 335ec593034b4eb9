"""Run configuration: structured text files in human units.

Configs are INI files.  Frequencies are given as nu = omega/2pi in Hz or as
dimensionless ratios of the mechanical frequency (keys ending in
``_over_omega_b``); powers in mW, temperatures in K, phases as multiples of
pi.  All internal math uses rad/s; the conversion happens only here.

Unknown sections or keys are rejected by name.  Exactly one drive must be
supplied: ``power_mw``, ``field_tesla``, or ``g_eff_over_omega_b`` (the
linearized coupling directly).  The magnon detuning takes exactly one of its
effective, bare, or bias-field forms.  Defaults fill everything else and are
echoed back by serialization, which round-trips losslessly.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError
from .params import PhysicalParams

__all__ = ["RunConfig", "load_config", "parse_config_text"]

TWO_PI = 2 * math.pi

# Allowed keys per section: name -> kind ("float", "int", "bool",
# "float_list", or a tuple of enum tokens).  Order fixes the canonical
# serialization; None defaults mean "must be derived or absent".
_SCHEMA = {
    "system": {
        "omega_a_hz": "float",
        "omega_b_hz": "float",
        "g_hz": "float",
        "g_over_omega_b": "float",
        "kappa_a_hz": "float",
        "kappa_a_over_omega_b": "float",
        "kappa_1_hz": "float",
        "kappa_1_over_omega_b": "float",
        "kappa_2_hz": "float",
        "kappa_2_over_omega_b": "float",
        "kappa_m_hz": "float",
        "kappa_m_over_omega_b": "float",
        "gamma_hz": "float",
        "delta_a_hz": "float",
        "delta_a_over_omega_b": "float",
        "delta_m_tilde_hz": "float",
        "delta_m_tilde_over_omega_b": "float",
        "delta_m_hz": "float",
        "delta_m_over_omega_b": "float",
        "bias_field_tesla": "float",
        "temperature_k": "float",
        "sphere_radius_m": "float",
        "g0_hz": "float",
        "kerr_k_hz": "float",
    },
    "drive": {
        "power_mw": "float",
        "field_tesla": "float",
        "g_eff_over_omega_b": "float",
    },
    "grid": {
        "omega_min_over_omega_b": "float",
        "omega_max_over_omega_b": "float",
        "n_omega": "int",
        "phi_over_pi": "float_list",
        "phi_min_over_pi": "float",
        "phi_max_over_pi": "float",
        "n_phi": "int",
    },
    "sweep": {
        "axis": ("phi", "delta_a", "kappa_a", "temperature"),
        "values": "float_list",
        "phi_over_pi": "float",
        "global_phi": "bool",
    },
    "threshold": {
        "power_bracket_mw": "float_list",
    },
    "ceiling": {
        "temperature_bracket_k": "float_list",
        "resolution_mk": "float",
    },
    "run": {
        "seed": "int",
    },
}

_DEFAULTS = {
    "system": {
        "omega_a_hz": "10000000000.0",
        "omega_b_hz": "10000000.0",
        "g_over_omega_b": "1.0",
        "kappa_a_over_omega_b": "1.0",
        "kappa_1_over_omega_b": "0.9",
        "kappa_m_over_omega_b": "0.2",
        "gamma_hz": "100.0",
        "delta_a_over_omega_b": "0.1",
        "temperature_k": "0.02",
        "sphere_radius_m": "0.000125",
        "g0_hz": "0.1",
        "kerr_k_hz": "6.4e-09",
    },
    "grid": {
        "omega_min_over_omega_b": "0.5",
        "omega_max_over_omega_b": "1.5",
        "n_omega": "201",
        "phi_over_pi": "0.3, 0.6, 0.9",
        "phi_min_over_pi": "0.0",
        "phi_max_over_pi": "1.0",
        "n_phi": "201",
    },
    "sweep": {
        "axis": "phi",
        "phi_over_pi": "0.3",
        "global_phi": "false",
    },
    "threshold": {
        "power_bracket_mw": "50.0, 2000.0",
    },
    "ceiling": {
        "temperature_bracket_k": "0.001, 2.0",
        "resolution_mk": "1.0",
    },
    "run": {
        "seed": "12345",
    },
}

# Default magnon detuning, applied only when no detuning key appears at all.
_DETUNING_KEYS = ("delta_m_tilde_hz", "delta_m_tilde_over_omega_b",
                  "delta_m_hz", "delta_m_over_omega_b", "bias_field_tesla")
_DEFAULT_DETUNING = ("delta_m_tilde_over_omega_b", "0.3")
_DRIVE_KEYS = ("power_mw", "field_tesla", "g_eff_over_omega_b")

# Pairs where at most one spelling may appear.
_EXCLUSIVE = [
    ("system", ("g_hz", "g_over_omega_b")),
    ("system", ("kappa_a_hz", "kappa_a_over_omega_b")),
    ("system", ("kappa_1_hz", "kappa_1_over_omega_b")),
    ("system", ("kappa_2_hz", "kappa_2_over_omega_b")),
    ("system", ("kappa_m_hz", "kappa_m_over_omega_b")),
    ("system", ("delta_a_hz", "delta_a_over_omega_b")),
    ("system", _DETUNING_KEYS),
    ("drive", _DRIVE_KEYS),
]


def _parse_value(kind, section: str, key: str, text: str):
    where = f"[{section}] {key}"
    if isinstance(kind, tuple):
        token = text.strip().lower()
        if token not in kind:
            raise ConfigError(f"{where}: expected one of {kind}, got {text!r}")
        return token
    if kind == "float":
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"{where}: not a number: {text!r}") from None
        if not math.isfinite(value):
            raise ConfigError(f"{where}: must be finite, got {text!r}")
        return value
    if kind == "int":
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{where}: not an integer: {text!r}") from None
    if kind == "bool":
        token = text.strip().lower()
        if token in ("true", "yes", "on", "1"):
            return True
        if token in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{where}: not a boolean: {text!r}")
    if kind == "float_list":
        try:
            values = tuple(float(tok) for tok in text.split(",") if tok.strip())
        except ValueError:
            raise ConfigError(f"{where}: not a number list: {text!r}") from None
        if not values:
            raise ConfigError(f"{where}: empty list")
        return values
    raise AssertionError(kind)


def _format_value(kind, value) -> str:
    if isinstance(kind, tuple):
        return str(value)
    if kind == "bool":
        return "true" if value else "false"
    if kind == "float_list":
        return ", ".join(repr(v) for v in value)
    if kind == "int":
        return str(value)
    return repr(value)


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration: parsed values plus canonical echo form."""

    values: dict          # {section: {key: parsed value}}

    def get(self, section: str, key: str, default=None):
        return self.values.get(section, {}).get(key, default)

    # -- unit resolution ---------------------------------------------------

    def _rate(self, key: str, omega_b: float) -> Optional[float]:
        hz = self.get("system", f"{key}_hz")
        ratio = self.get("system", f"{key}_over_omega_b")
        if hz is not None:
            return TWO_PI * hz
        if ratio is not None:
            return ratio * omega_b
        return None

    def physical_params(self) -> PhysicalParams:
        """Resolve to SI parameters (rad/s internally)."""
        omega_b = TWO_PI * self.get("system", "omega_b_hz")
        omega_a = TWO_PI * self.get("system", "omega_a_hz")
        kappa_a = self._rate("kappa_a", omega_b)
        kappa_1 = self._rate("kappa_1", omega_b)
        kappa_2 = self._rate("kappa_2", omega_b)
        if kappa_2 is None:
            kappa_2 = kappa_a - kappa_1
            if kappa_2 < -1e-9 * kappa_a:
                raise ConfigError(
                    "[system] kappa_1 exceeds kappa_a: the port split must "
                    "satisfy kappa_1 + kappa_2 = kappa_a")
            kappa_2 = max(kappa_2, 0.0)
        elif abs(kappa_1 + kappa_2 - kappa_a) > 1e-9 * max(kappa_a, 1.0):
            raise ConfigError(
                f"[system] kappa_1 + kappa_2 != kappa_a "
                f"({(kappa_1 + kappa_2) / TWO_PI} Hz vs {kappa_a / TWO_PI} Hz)")
        delta_m_tilde = self._rate("delta_m_tilde", omega_b)
        delta_m = self._rate("delta_m", omega_b)
        bias = self.get("system", "bias_field_tesla")
        drive_power = self.get("drive", "power_mw")
        try:
            return PhysicalParams(
                omega_a=omega_a,
                omega_b=omega_b,
                kappa_a=kappa_a,
                kappa_1=kappa_1,
                kappa_2=kappa_2,
                kappa_m=self._rate("kappa_m", omega_b),
                gamma=TWO_PI * self.get("system", "gamma_hz"),
                g=self._rate("g", omega_b),
                G0=TWO_PI * self.get("system", "g0_hz"),
                delta_a=self._rate("delta_a", omega_b),
                temperature=self.get("system", "temperature_k"),
                sphere_radius=self.get("system", "sphere_radius_m"),
                kerr_K=TWO_PI * self.get("system", "kerr_k_hz"),
                delta_m_tilde=delta_m_tilde,
                delta_m=delta_m,
                bias_field=bias,
                drive_power=None if drive_power is None else drive_power * 1e-3,
                drive_field=self.get("drive", "field_tesla"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def g_eff(self) -> Optional[complex]:
        """Directly supplied linearized coupling, if that drive mode is used."""
        ratio = self.get("drive", "g_eff_over_omega_b")
        if ratio is None:
            return None
        return complex(ratio * TWO_PI * self.get("system", "omega_b_hz"))

    # -- command options ---------------------------------------------------

    def omega_grid_spec(self) -> tuple[float, float, int]:
        return (self.get("grid", "omega_min_over_omega_b"),
                self.get("grid", "omega_max_over_omega_b"),
                self.get("grid", "n_omega"))

    def phi_grid_spec(self) -> tuple[float, float, int]:
        return (self.get("grid", "phi_min_over_pi"),
                self.get("grid", "phi_max_over_pi"),
                self.get("grid", "n_phi"))

    # -- canonical text form -----------------------------------------------

    def to_ini(self) -> str:
        out = io.StringIO()
        first = True
        for section in _SCHEMA:
            items = self.values.get(section)
            if not items:
                continue
            if not first:
                out.write("\n")
            first = False
            out.write(f"[{section}]\n")
            for key, kind in _SCHEMA[section].items():
                if key in items:
                    out.write(f"{key} = {_format_value(kind, items[key])}\n")
        return out.getvalue()

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_ini().encode("utf-8")).hexdigest()[:12]


def parse_config_text(text: str, origin: str = "<string>") -> RunConfig:
    """Parse and validate configuration text; apply and record defaults."""
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from exc
    if not parser.sections():
        raise ConfigError(f"parse error: {origin}: empty configuration "
                          "(no sections)")

    values: dict = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}] (allowed: "
                              f"{', '.join(_SCHEMA)})")
        allowed = _SCHEMA[section]
        parsed = {}
        for key, raw in parser.items(section):
            if key not in allowed:
                raise ConfigError(f"unknown key '{key}' in [{section}] "
                                  f"(allowed: {', '.join(allowed)})")
            parsed[key] = _parse_value(allowed[key], section, key, raw)
        values[section] = parsed

    # Exclusivity before defaults so conflicts are reported by name.
    for section, group in _EXCLUSIVE:
        present = [k for k in group if k in values.get(section, {})]
        if len(present) > 1:
            raise ConfigError(
                f"conflicting keys in [{section}]: {' and '.join(present)} "
                "(supply exactly one)")

    if not any(k in values.get("drive", {}) for k in _DRIVE_KEYS):
        raise ConfigError("[drive] must supply exactly one of power_mw, "
                          "field_tesla, g_eff_over_omega_b")
    if "g_eff_over_omega_b" in values.get("drive", {}):
        bare = [k for k in ("delta_m_hz", "delta_m_over_omega_b",
                            "bias_field_tesla") if k in values.get("system", {})]
        if bare:
            raise ConfigError(
                f"[drive] g_eff_over_omega_b requires the effective detuning "
                f"(delta_m_tilde_*); got bare form {bare[0]} in [system]")

    for section, defaults in _DEFAULTS.items():
        target = values.setdefault(section, {})
        for key, raw in defaults.items():
            # A *_hz spelling suppresses the ratio default and vice versa.
            twin = _twin_key(key)
            if key in target or (twin and twin in target):
                continue
            target[key] = _parse_value(_SCHEMA[section][key], section, key, raw)
    if not any(k in values["system"] for k in _DETUNING_KEYS):
        key, raw = _DEFAULT_DETUNING
        values["system"][key] = _parse_value(_SCHEMA["system"][key], "system",
                                             key, raw)

    cfg = RunConfig(values=values)
    cfg.physical_params()   # surface constraint violations now
    return cfg


def _twin_key(key: str) -> Optional[str]:
    if key.endswith("_over_omega_b"):
        return key[: -len("_over_omega_b")] + "_hz"
    if key.endswith("_hz"):
        return key[: -len("_hz")] + "_over_omega_b"
    return None


def load_config(path) -> RunConfig:
    """Load and validate a configuration file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, origin=str(path))
