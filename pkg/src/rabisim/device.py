"""Device and drive parameter containers.

All frequencies and rates are stored angular (rad/s) and times in
seconds.  Defaults follow the published device table: mode at
5.948 GHz, readout at 8.86 GHz, kappa = 3.9e6 1/s, 1/T1 = 0.2e6 1/s,
T2 = 0.5 us, anharmonicity -0.36 GHz.  The geometric coupling g carries
the master-equation value 2pi * 5.5 MHz by default; vacuum-Rabi style
experiments override it with the measured 2pi * 4.3 MHz and spectroscopy
with 2pi * 3.9 MHz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

TWOPI = 2.0 * math.pi

__all__ = ["DriveTone", "DeviceParams", "EffectiveParams", "GHZ", "MHZ", "US", "NS"]

GHZ = TWOPI * 1e9
MHZ = TWOPI * 1e6
US = 1e-6
NS = 1e-9


@dataclass(frozen=True)
class DriveTone:
    """One transversal microwave tone: eta cos(omega t + phi) on the qubit."""

    amplitude: float  # eta, rad/s
    frequency: float  # omega_i, rad/s
    phase: float = 0.0  # radians, normalized to [0, 2pi)

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError(f"drive amplitude must be >= 0, got {self.amplitude}")
        if self.frequency <= 0:
            raise ValueError(f"drive frequency must be > 0, got {self.frequency}")
        object.__setattr__(self, "phase", self.phase % TWOPI)


@dataclass(frozen=True)
class DeviceParams:
    """Physical device symbols plus simulation dimensions."""

    epsilon: float = 5.948 * GHZ  # qubit splitting
    omega: float = 5.948 * GHZ  # bosonic mode frequency
    g: float = 5.5 * MHZ  # geometric qubit-mode coupling
    omega_r: float = 8.86 * GHZ  # readout resonator frequency
    g_r: float = 55.0 * MHZ  # qubit-readout coupling
    f: float = 1.0 * MHZ  # mode-readout photon exchange
    anharmonicity: float = -0.36 * GHZ  # transmon alpha (negative)
    kappa: float = 3.9e6  # mode inverse lifetime, 1/s
    t1: float = 5.0 * US  # qubit energy relaxation time
    t2: float = 0.5 * US  # qubit coherence time
    eta_r: float = 5.0 * MHZ  # parasitic drive amplitude on the mode
    qubit_levels: int = 2
    fock_dim: int = 26
    readout_dim: int = 5

    def __post_init__(self):
        for name in ("epsilon", "omega", "g", "omega_r", "g_r", "f", "kappa", "eta_r"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.t1 <= 0 or self.t2 <= 0:
            raise ValueError("T1 and T2 must be positive")
        if self.t2 > 2 * self.t1 * (1 + 1e-12):
            raise ValueError(f"T2 = {self.t2} exceeds 2*T1 = {2*self.t1} (unphysical)")
        if self.qubit_levels not in (2, 3):
            raise ValueError("qubit_levels must be 2 or 3")
        if self.fock_dim < 2:
            raise ValueError("fock_dim must be >= 2")
        if self.readout_dim < 2:
            raise ValueError("readout_dim must be >= 2")

    @property
    def gamma_phi(self) -> float:
        """Pure dephasing rate 1/T2 - 1/(2 T1)."""
        return 1.0 / self.t2 - 0.5 / self.t1

    def with_(self, **kwargs) -> "DeviceParams":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class EffectiveParams:
    """Parameters of the synthesized Rabi model in the dominant-drive frame."""

    omega_eff: float  # omega - omega_1, rad/s
    epsilon_eff: float  # eta_2, rad/s
    g_eff: float  # g / 2, rad/s

    @classmethod
    def from_lab(cls, g: float, omega: float, omega_1: float, eta_2: float = 0.0) -> "EffectiveParams":
        """omega_eff = omega - omega_1, epsilon_eff = eta_2, g_eff = g/2 exactly."""
        return cls(omega_eff=omega - omega_1, epsilon_eff=eta_2, g_eff=g / 2.0)

    @property
    def g(self) -> float:
        """Geometric coupling the effective one derives from (g = 2 g_eff)."""
        return 2.0 * self.g_eff
