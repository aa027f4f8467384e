"""Signal processing for simulated traces: fits, spectral peaks, envelopes."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.optimize import curve_fit
from scipy.signal import butter, filtfilt

TWOPI = 2.0 * math.pi

__all__ = [
    "FitResult",
    "FitError",
    "NoPeakError",
    "fit_damped_cosine",
    "extract_rabi_frequency",
    "extract_envelope",
    "drive_period_average",
]


class FitError(RuntimeError):
    """A least-squares fit failed to converge."""


class NoPeakError(RuntimeError):
    """No spectral peak stands out of the noise floor."""


@dataclass(frozen=True)
class FitResult:
    """Damped-cosine fit: offset + amplitude * exp(-gamma t) cos(omega t)."""

    omega: float  # rad/s
    gamma: float  # 1/s
    amplitude: float
    offset: float
    residual_norm: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("fitted decay rate must be >= 0")


def _damped_cosine(t, offset, amplitude, omega, gamma):
    return offset + amplitude * np.exp(-gamma * t) * np.cos(omega * t)


def fit_damped_cosine(times: np.ndarray, values: np.ndarray, omega_guess: float | None = None) -> FitResult:
    """Fit offset + A exp(-Gamma t) cos(omega t); omega seeded from the FFT."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if omega_guess is None:
        omega_guess, _ = extract_rabi_frequency(times, values)
    span = times[-1] - times[0]
    p0 = (values.mean(), np.ptp(values) / 2.0, omega_guess, 1.0 / span)
    try:
        popt, _ = curve_fit(
            _damped_cosine,
            times,
            values,
            p0=p0,
            bounds=([-np.inf, 0.0, 0.0, 0.0], [np.inf, np.inf, np.inf, np.inf]),
            maxfev=20000,
        )
    except RuntimeError as exc:
        raise FitError(f"damped-cosine fit did not converge: {exc}") from exc
    resid = values - _damped_cosine(times, *popt)
    return FitResult(
        omega=float(popt[2]),
        gamma=float(popt[3]),
        amplitude=float(popt[1]),
        offset=float(popt[0]),
        residual_norm=float(np.linalg.norm(resid)),
    )


def extract_rabi_frequency(times: np.ndarray, values: np.ndarray, noise_factor: float = 3.0) -> tuple[float, float]:
    """Dominant non-DC frequency via Hann-windowed FFT, rad/s.

    The peak bin is refined by parabolic interpolation over three bins;
    the uncertainty returned is half the bin width after interpolation.
    Raises NoPeakError when the strongest bin does not exceed
    ``noise_factor`` times the spectral noise floor (median magnitude).
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n < 8:
        raise ValueError("trace too short for spectral estimation")
    dt = times[1] - times[0]
    if np.ptp(values) <= 1e-12 * max(1.0, abs(values.mean())):
        raise NoPeakError("trace is constant: no spectral peak")
    window = np.hanning(n)
    spec = np.abs(np.fft.rfft((values - values.mean()) * window))
    freqs = np.fft.rfftfreq(n, dt)
    spec[0] = 0.0
    k = int(np.argmax(spec))
    floor = np.median(spec[1:])
    if k == 0 or spec[k] <= noise_factor * max(floor, 1e-300) or spec[k] == 0.0:
        raise NoPeakError("no spectral peak above the noise floor")
    # parabolic refinement on log magnitude
    if 1 <= k < len(spec) - 1 and spec[k - 1] > 0 and spec[k + 1] > 0:
        a, b, c = np.log(spec[k - 1 : k + 2])
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
        shift = float(np.clip(shift, -0.5, 0.5))
    else:
        shift = 0.0
    bin_width = freqs[1] - freqs[0]
    f_peak = freqs[k] + shift * bin_width
    return TWOPI * f_peak, TWOPI * bin_width / 2.0


def extract_envelope(
    times: np.ndarray,
    values: np.ndarray,
    carrier: float,
    dynamics_frequency: float | None = None,
) -> np.ndarray:
    """Demodulated magnitude envelope, re-centered around the trace mean.

    The trace is mixed down at ``carrier`` (rad/s), low-passed at a
    quarter of the carrier with a zero-phase forward-backward filter,
    and the doubled magnitude is added back onto the trace mean.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if carrier <= 0:
        raise ValueError("carrier must be positive")
    if dynamics_frequency is not None and carrier < 4.0 * dynamics_frequency:
        warnings.warn(
            "carrier below 4x the dynamics frequency: envelope separation is poor",
            stacklevel=2,
        )
    dt = times[1] - times[0]
    fs = 1.0 / dt
    f_carrier = carrier / TWOPI
    cutoff = f_carrier / 4.0
    if cutoff >= fs / 2:
        raise ValueError("carrier too fast for the sampling rate")
    z = (values - values.mean()) * np.exp(-1j * carrier * times)
    b, a = butter(4, cutoff / (fs / 2.0))
    zf = filtfilt(b, a, z.real) + 1j * filtfilt(b, a, z.imag)
    return values.mean() + 2.0 * np.abs(zf)


def drive_period_average(times: np.ndarray, values: np.ndarray, drive_frequency: float) -> np.ndarray:
    """Centered moving average over one drive period (micromotion removal)."""
    dt = times[1] - times[0]
    period = TWOPI / drive_frequency
    n = max(1, int(round(period / dt)) | 1)
    return uniform_filter1d(np.asarray(values, dtype=float), n, mode="reflect")
