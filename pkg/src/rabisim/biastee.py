"""Bias-tee droop compensation for fast flux pulses.

The flux line sees an RC high-pass with time constant tau = R C.  From
Kirchhoff, R I + Q/C = V_ex, so holding the admitted current constant
during a pulse segment requires dV_ex/dt = I/C: a linear voltage ramp
with slope proportional to 1/tau.  During pulse-off segments the output
is held constant.  Compensation saturates the pulse generator beyond
roughly 1 us of continuous ramping.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = ["PulseSequence", "bias_tee_compensate", "rc_response"]

DEFAULT_SATURATION_HORIZON = 1e-6  # s


@dataclass(frozen=True)
class PulseSequence:
    """Sampled ideal flux waveform and the compensated drive voltage."""

    times: np.ndarray
    ideal: np.ndarray  # target current through the flux line (arb. units)
    compensated: np.ndarray  # voltage to apply at the bias-tee input
    tau: float  # bias-tee time constant, s

    def __post_init__(self):
        for name in ("times", "ideal", "compensated"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.tau <= 0:
            raise ValueError("bias-tee time constant must be positive")
        if not (len(self.times) == len(self.ideal) == len(self.compensated)):
            raise ValueError("waveform arrays must share one grid")


def _segments(ideal: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of constant target current, as [start, end) index pairs."""
    edges = [0] + list(np.nonzero(np.diff(ideal) != 0)[0] + 1) + [len(ideal)]
    return [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]


def bias_tee_compensate(
    times: np.ndarray,
    ideal: np.ndarray,
    tau: float,
    resistance: float,
    saturation_horizon: float = DEFAULT_SATURATION_HORIZON,
) -> PulseSequence:
    """Compensated bias-tee input voltage for a piecewise-constant target.

    Each constant-current segment gets a voltage step to R*I plus the
    accumulated capacitor charge, followed by a ramp of slope I/C; zero
    segments hold the voltage so no current flows.
    """
    times = np.asarray(times, dtype=float)
    ideal = np.asarray(ideal, dtype=float)
    if tau <= 0 or resistance <= 0:
        raise ValueError("tau and resistance must be positive")
    cap = tau / resistance
    v = np.zeros_like(ideal)
    q = 0.0  # capacitor charge
    for start, end in _segments(ideal):
        i_target = ideal[start]
        seg_t = times[start:end]
        length = seg_t[-1] - seg_t[0]
        if i_target != 0 and length > saturation_horizon:
            warnings.warn(
                f"compensation segment of {length*1e6:.2f} us exceeds the "
                f"{saturation_horizon*1e6:.2f} us saturation horizon",
                stacklevel=2,
            )
        v[start:end] = resistance * i_target + q / cap + (i_target / cap) * (seg_t - seg_t[0])
        q += i_target * length
    return PulseSequence(times=times, ideal=ideal, compensated=v, tau=tau)


def rc_response(times: np.ndarray, voltage: np.ndarray, tau: float, resistance: float) -> np.ndarray:
    """Current admitted through the bias tee for a given input voltage.

    Integrates R dQ/dt + Q/C = V(t) exactly per sample interval with V
    linear within each interval, returning I(t) = (V - Q/C)/R.
    """
    times = np.asarray(times, dtype=float)
    voltage = np.asarray(voltage, dtype=float)
    q = 0.0
    cap = tau / resistance
    current = np.empty_like(voltage)
    current[0] = (voltage[0] - q / cap) / resistance
    for i in range(1, len(times)):
        dt = times[i] - times[i - 1]
        v0, v1 = voltage[i - 1], voltage[i]
        slope = (v1 - v0) / dt
        # exact solution of R dQ/dt + Q/C = v0 + slope (t - t0)
        decay = math.exp(-dt / tau)
        q_inf0 = cap * (v0 - slope * tau)
        q = q_inf0 + cap * slope * dt + (q - q_inf0) * decay
        current[i] = (v1 - q / cap) / resistance
    return current
