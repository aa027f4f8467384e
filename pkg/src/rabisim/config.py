"""Flat key-value run configuration with explicit units.

Config files are UTF-8 text, one ``key = value`` per line, ``#`` starts
a comment.  Every frequency key is a /2pi value with a unit suffix
(``_ghz``/``_mhz``), times carry ``_us``, rates ``_per_s``, phases
``_rad``.  Values are converted to angular frequencies (rad/s) and
seconds at parse time.  Unknown keys are rejected with the offending
line; identical text always parses to an identical configuration.
"""

from __future__ import annotations

import difflib
import math
from dataclasses import dataclass, field

from .device import GHZ, MHZ, US, DeviceParams

TWOPI = 2.0 * math.pi

__all__ = ["ConfigError", "RunConfig", "parse_config", "default_config_text", "EXPERIMENTS"]

EXPERIMENTS = (
    "vacuum-rabi",
    "detuning-map",
    "collapse-revival",
    "full-rabi",
    "verify-scheme",
    "parasitic",
    "violate-constraint",
    "avoided-crossing",
    "transmon-levels",
    "bias-tee",
)

# experiment-specific geometric coupling defaults (device table):
# 4.3 MHz measured in vacuum Rabi, 3.9 MHz in spectroscopy, 5.5 MHz in
# master-equation comparisons, 5.0 MHz in the w_eff ~ g verification regime.
G_DEFAULT_MHZ = {
    "vacuum-rabi": 4.3,
    "detuning-map": 4.3,
    "avoided-crossing": 3.9,
    "verify-scheme": 5.0,
}
G_FALLBACK_MHZ = 5.5


class ConfigError(ValueError):
    """Config text failed validation; message names key and line."""


def _positive(x: float) -> bool:
    return x > 0


def _non_negative(x: float) -> bool:
    return x >= 0


@dataclass(frozen=True)
class _Key:
    name: str
    kind: str  # float | int | bool | str | floats
    default: object
    scale: float = 1.0  # conversion to SI (rad/s, s)
    check: object = None
    choices: tuple[str, ...] = ()
    help: str = ""


_SCHEMA: tuple[_Key, ...] = (
    _Key("experiment", "str", "vacuum-rabi", choices=EXPERIMENTS, help="experiment to run"),
    # device
    _Key("epsilon_ghz", "float", 5.948, GHZ, _positive, help="qubit splitting /2pi"),
    _Key("omega_ghz", "float", 5.948, GHZ, _positive, help="bosonic mode frequency /2pi"),
    _Key("g_mhz", "float", G_FALLBACK_MHZ, MHZ, _positive, help="qubit-mode coupling /2pi (per-experiment default)"),
    _Key("omega_r_ghz", "float", 8.86, GHZ, _positive, help="readout resonator frequency /2pi"),
    _Key("g_r_mhz", "float", 55.0, MHZ, _non_negative, help="qubit-readout coupling /2pi"),
    _Key("f_mhz", "float", 1.0, MHZ, _non_negative, help="mode-readout photon exchange /2pi"),
    _Key("anharmonicity_ghz", "float", -0.36, GHZ, help="transmon anharmonicity /2pi (negative)"),
    _Key("kappa_per_s", "float", 3.9e6, 1.0, _non_negative, help="mode inverse lifetime"),
    _Key("t1_us", "float", 5.0, US, _positive, help="qubit energy relaxation time"),
    _Key("t2_us", "float", 0.5, US, _positive, help="qubit coherence time"),
    _Key("eta_r_mhz", "float", 5.0, MHZ, _non_negative, help="parasitic mode-drive amplitude /2pi"),
    _Key("qubit_levels", "int", 2, help="2 or 3 transmon levels"),
    _Key("fock_dim", "int", 26, help="bosonic Fock-space dimension"),
    _Key("readout_dim", "int", 5, help="readout Fock-space dimension"),
    # drives and experiment knobs
    _Key("eta1_mhz", "float", 50.0, MHZ, _non_negative, help="dominant Rabi tone amplitude /2pi"),
    _Key("eta2_mhz", "float", 3.0, MHZ, _non_negative, help="weak tone amplitude /2pi"),
    _Key("phi1_rad", "float", 0.0, help="dominant tone phase"),
    _Key("phi2_rad", "float", 0.0, help="weak tone phase"),
    _Key("omega_eff_mhz", "float", 8.0, MHZ, _positive, help="effective mode frequency /2pi"),
    _Key("initial_state", "str", "e", choices=("g", "e", "plus", "minus"), help="initial qubit state"),
    # sweeps
    _Key("omega_eff_list_mhz", "floats", (4.0, 5.0, 6.0, 8.0), MHZ, help="omega_eff sweep /2pi"),
    _Key("eta1_list_mhz", "floats", (40.0, 50.0, 60.0), MHZ, help="eta1 sweep /2pi"),
    _Key("eta_r_list_mhz", "floats", (0.0, 2.5, 5.0), MHZ, help="parasitic amplitude sweep /2pi"),
    _Key("detuning_span_mhz", "float", 40.0, MHZ, _positive, help="detuning map half-span /2pi"),
    _Key("detuning_count", "int", 9, help="detuning map points"),
    _Key("violation", "str", "phase", choices=("phase", "frequency", "compliant"), help="constraint violation mode"),
    # grid
    _Key("duration_us", "float", 0.0, US, _non_negative, help="trace duration (0 = auto)"),
    _Key("samples", "int", 0, help="trace sample count (0 = auto)"),
    # flags
    _Key("parasitic", "bool", False, help="include parasitic mode drive"),
    _Key("readout", "bool", False, help="include readout resonator"),
    _Key("rwa", "bool", True, help="drop 2 omega_1 terms in the rotating frame"),
    _Key("frame", "str", "rotating", choices=("rotating", "lab"), help="evaluation frame for driven runs"),
    _Key("deterministic", "bool", True, help="assert seedless determinism (no RNG anywhere)"),
    _Key("check_truncation", "bool", False, help="re-run with +5 Fock levels and flag >1% changes"),
    _Key("dissipation", "bool", True, help="include collapse channels"),
    # transmon diagonalization
    _Key("ec_ghz", "float", 0.31, 1.0, _positive, help="charging energy E_C/h in GHz"),
    _Key("ej_over_ec", "float", 50.0, 1.0, _positive, help="E_J / E_C ratio"),
    _Key("n_g", "float", 0.0, help="offset charge"),
    _Key("charge_cutoff", "int", 30, help="charge basis cutoff"),
    _Key("level_count", "int", 3, help="transmon levels returned"),
    # bias tee
    _Key("tau_us", "float", 0.7, US, _positive, help="bias-tee time constant"),
    _Key("resistance_ohm", "float", 50.0, 1.0, _positive, help="line resistance"),
    _Key("pulse_ns", "float", 500.0, 1e-9, _positive, help="flat flux pulse length"),
    _Key("pulse_amplitude", "float", 1.0, help="flat flux pulse amplitude (arb. units)"),
)

_BY_NAME = {k.name: k for k in _SCHEMA}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration: SI values plus which keys were explicit."""

    values: dict
    explicit: frozenset = field(default_factory=frozenset)

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def experiment(self) -> str:
        return self.values["experiment"]

    def is_explicit(self, key: str) -> bool:
        return key in self.explicit

    def g_value(self) -> float:
        """Geometric coupling with the per-experiment default applied."""
        if self.is_explicit("g_mhz"):
            return self.values["g_mhz"]
        return G_DEFAULT_MHZ.get(self.experiment, G_FALLBACK_MHZ) * MHZ

    def device_params(self) -> DeviceParams:
        v = self.values
        try:
            return DeviceParams(
                epsilon=v["epsilon_ghz"],
                omega=v["omega_ghz"],
                g=self.g_value(),
                omega_r=v["omega_r_ghz"],
                g_r=v["g_r_mhz"],
                f=v["f_mhz"],
                anharmonicity=v["anharmonicity_ghz"],
                kappa=v["kappa_per_s"],
                t1=v["t1_us"],
                t2=v["t2_us"],
                eta_r=v["eta_r_mhz"],
                qubit_levels=v["qubit_levels"],
                fock_dim=v["fock_dim"],
                readout_dim=v["readout_dim"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _convert(key: _Key, text: str, line_no: int):
    loc = f"line {line_no}: key {key.name!r}"
    if key.kind == "str":
        val = text.strip()
        if key.choices and val not in key.choices:
            raise ConfigError(f"{loc}: value {val!r} not one of {key.choices}")
        return val
    if key.kind == "bool":
        low = text.strip().lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{loc}: expected a boolean, got {text!r}")
    if key.kind == "int":
        try:
            val = int(text.strip())
        except ValueError as exc:
            raise ConfigError(f"{loc}: expected an integer, got {text!r}") from exc
        if val < 0:
            raise ConfigError(f"{loc}: must be >= 0, got {val}")
        return val
    if key.kind == "float":
        try:
            raw = float(text.strip())
        except ValueError as exc:
            raise ConfigError(f"{loc}: expected a number, got {text!r}") from exc
        if key.check is not None and not key.check(raw):
            raise ConfigError(f"{loc}: value {raw} out of range")
        return raw * key.scale
    if key.kind == "floats":
        try:
            vals = tuple(float(x) * key.scale for x in text.split(",") if x.strip())
        except ValueError as exc:
            raise ConfigError(f"{loc}: expected comma-separated numbers, got {text!r}") from exc
        if not vals:
            raise ConfigError(f"{loc}: empty list")
        return vals
    raise AssertionError(f"unhandled kind {key.kind}")


def _defaults() -> dict:
    out = {}
    for k in _SCHEMA:
        if k.kind == "float":
            out[k.name] = k.default * k.scale
        elif k.kind == "floats":
            out[k.name] = tuple(v * k.scale for v in k.default)
        else:
            out[k.name] = k.default
    return out


def parse_config(text: str) -> RunConfig:
    """Parse and validate; identical text yields an identical config."""
    values = _defaults()
    explicit = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw.rstrip()!r}")
        name, _, rhs = line.partition("=")
        name = name.strip()
        if name not in _BY_NAME:
            hint = difflib.get_close_matches(name, _BY_NAME.keys(), n=1)
            extra = f" (did you mean {hint[0]!r}?)" if hint else ""
            raise ConfigError(f"line {line_no}: unknown key {name!r}{extra}")
        if not rhs.strip():
            raise ConfigError(f"line {line_no}: key {name!r} has no value")
        values[name] = _convert(_BY_NAME[name], rhs, line_no)
        explicit.add(name)

    if values["t2_us"] > 2 * values["t1_us"]:
        raise ConfigError("t2_us exceeds 2 * t1_us (unphysical dephasing rate)")
    if values["qubit_levels"] not in (2, 3):
        raise ConfigError("qubit_levels must be 2 or 3")
    if values["fock_dim"] < 2 or values["readout_dim"] < 2:
        raise ConfigError("fock_dim and readout_dim must be >= 2")
    if values["samples"] and values["samples"] < 2:
        raise ConfigError("samples must be 0 (auto) or >= 2")
    cfg = RunConfig(values=values, explicit=frozenset(explicit))
    cfg.device_params()  # surface parameter inconsistencies at parse time
    return cfg


def apply_overrides(cfg: RunConfig, assignments: list[str]) -> RunConfig:
    """Apply ``key=value`` strings on top of a parsed config."""
    text = "\n".join(assignments)
    values = dict(cfg.values)
    explicit = set(cfg.explicit)
    override = parse_config(text)
    for name in override.explicit:
        values[name] = override.values[name]
        explicit.add(name)
    out = RunConfig(values=values, explicit=frozenset(explicit))
    out.device_params()
    return out


def default_config_text() -> str:
    """Canonical defaults, printable as a valid config file."""
    lines = ["# rabisim defaults (device table values)"]
    for k in _SCHEMA:
        if k.kind == "floats":
            val = ",".join(f"{v:g}" for v in k.default)
        elif k.kind == "bool":
            val = "true" if k.default else "false"
        else:
            val = f"{k.default}"
        lines.append(f"{k.name} = {val}  # {k.help}")
    return "\n".join(lines) + "\n"
