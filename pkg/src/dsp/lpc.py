"""
Linear prediction: windows, autocorrelation, Levinson-Durbin, analysis and
synthesis filtering, pre-/de-emphasis and the 64-point log envelope grid.

Convention: A(z) = sum_i a[i] z^-i with a[0] = 1, so the prediction error is
e = A(z) x and synthesis runs 1/A(z).
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import signal as sps

from exceptions import DegenerateInputError, PreconditionError, StabilityError

ENVELOPE_POINTS = 64
ENVELOPE_FFT = 128
ENVELOPE_SPACING_HZ = 125.0
WHITE_NOISE_CORRECTION = 1e-4
_POWER_FLOOR = 1e-20

WIDEBAND_ORDER = 16
NARROWBAND_ORDER = 10


def _vector(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise PreconditionError(detail=f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LpcModel:
    coeffs: np.ndarray
    residual_energy: float = 1.0
    reflection: Optional[np.ndarray] = None
    truncated: bool = False  # Levinson stopped before reaching the requested order

    def __post_init__(self):
        coeffs = _vector(self.coeffs, "LPC coefficients")
        if coeffs.size < 1 or coeffs[0] != 1.0:
            raise PreconditionError(detail="LPC coefficients must start with a[0] = 1")
        if not (np.isfinite(self.residual_energy) and self.residual_energy >= 0.0):
            raise PreconditionError(detail="Residual energy must be finite and non-negative")
        object.__setattr__(self, "coeffs", coeffs)
        if self.reflection is not None:
            object.__setattr__(self, "reflection", _vector(self.reflection, "Reflection coefficients"))

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @property
    def gain(self) -> float:
        return float(np.sqrt(self.residual_energy))

    @property
    def is_stable(self) -> bool:
        k = self.reflection if self.reflection is not None else reflection_coefficients(self.coeffs)
        return k is not None and bool(np.all(np.abs(k) < 1.0))

    @classmethod
    def flat(cls, order: int, residual_energy: float = 1.0) -> "LpcModel":
        coeffs = np.zeros(order + 1)
        coeffs[0] = 1.0
        return cls(coeffs, residual_energy, np.zeros(order))


@dataclass(frozen=True, eq=False)
class EnvelopeSpectrum:
    """Log power (dB) at f_k = 125 k Hz, k = 0..63."""
    points: np.ndarray

    def __post_init__(self):
        points = _vector(self.points, "Envelope points")
        if points.size != ENVELOPE_POINTS:
            raise PreconditionError(detail=f"Envelope needs {ENVELOPE_POINTS} points, got {points.size}")
        object.__setattr__(self, "points", points)

    @staticmethod
    def frequencies() -> np.ndarray:
        return np.arange(ENVELOPE_POINTS) * ENVELOPE_SPACING_HZ


@dataclass(frozen=True, eq=False)
class FilterState:
    """Past samples of a streaming filter, oldest first, length = order."""
    memory: np.ndarray

    @classmethod
    def zeros(cls, order: int) -> "FilterState":
        return cls(np.zeros(order))

    @property
    def order(self) -> int:
        return int(self.memory.size)


# -------------------------------------------------
# Building blocks
# -------------------------------------------------

@functools.lru_cache(maxsize=16)
def _hann(length: int) -> np.ndarray:
    w = sps.windows.hann(length, sym=False)
    w.setflags(write=False)
    return w


def hanning_window(length: int) -> np.ndarray:
    """w(n) = 0.5 - 0.5 cos(2 pi n / L), n = 0..L-1."""
    if length < 2:
        raise PreconditionError(detail=f"Window length must be at least 2, got {length}")
    return _hann(int(length)).copy()


def autocorrelation(x, max_lag: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if max_lag < 0 or n <= max_lag:
        raise PreconditionError(detail=f"Need more than {max_lag} samples for autocorrelation, got {n}")
    return np.array([np.dot(x[: n - k], x[k:]) for k in range(max_lag + 1)])


def levinson_durbin(r) -> LpcModel:
    r = np.asarray(r, dtype=np.float64)
    if r.size < 1 or not np.all(np.isfinite(r)):
        raise PreconditionError(detail="Autocorrelation must be non-empty and finite")
    if r[0] <= 0.0:
        raise DegenerateInputError(detail="Autocorrelation r[0] must be positive")
    order = r.size - 1
    a = np.zeros(order + 1)
    a[0] = 1.0
    k = np.zeros(order)
    err = r[0]
    truncated = False
    for i in range(1, order + 1):
        acc = r[i] + np.dot(a[1:i], r[i - 1 : 0 : -1])
        ki = -acc / err
        if not np.isfinite(ki) or abs(ki) >= 1.0:
            truncated = True
            break
        a[1:i] = a[1:i] + ki * a[i - 1 : 0 : -1]
        a[i] = ki
        k[i - 1] = ki
        err *= 1.0 - ki * ki
    return LpcModel(a, float(err), k, truncated)


def reflection_coefficients(coeffs) -> Optional[np.ndarray]:
    """Step-down recursion; None when some |k| >= 1 (unstable model)."""
    a = np.asarray(coeffs, dtype=np.float64)[1:].copy()
    order = a.size
    k = np.zeros(order)
    for i in range(order, 0, -1):
        ki = a[i - 1]
        if abs(ki) >= 1.0:
            return None
        k[i - 1] = ki
        if i > 1:
            prev = a[: i - 1]
            a[: i - 1] = (prev - ki * prev[::-1]) / (1.0 - ki * ki)
    return k


def _check_mu(mu: float) -> None:
    if not 0.0 <= mu < 1.0:
        raise PreconditionError(detail=f"Pre-emphasis coefficient must lie in [0, 1), got {mu}")


def pre_emphasis(x, mu: float, last: float = 0.0) -> np.ndarray:
    """y[n] = x[n] - mu x[n-1]; `last` is the sample preceding x (0 gives y[0] = x[0])."""
    _check_mu(mu)
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    y = x.copy()
    y[0] -= mu * last
    y[1:] -= mu * x[:-1]
    return y


def de_emphasis(x, mu: float, last: float = 0.0) -> Tuple[np.ndarray, float]:
    """Inverse of pre_emphasis; returns the output and its last sample for the next call."""
    _check_mu(mu)
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return x.copy(), last
    y, _ = sps.lfilter([1.0], [1.0, -mu], x, zi=np.array([mu * last]))
    return y, float(y[-1])


# -------------------------------------------------
# Analysis and filtering
# -------------------------------------------------

def windowed_energy(length: int) -> float:
    """Power sum of the analysis window, converts LPC energies to per-sample level."""
    return float(np.sum(np.square(_hann(length))))


def lpc_analysis(frame, order: int, preemph: float) -> LpcModel:
    frame = np.asarray(frame, dtype=np.float64)
    if order < 1 or frame.size < 2 * order:
        raise PreconditionError(detail=f"Frame of {frame.size} samples too short for order {order}")
    y = pre_emphasis(frame, preemph) * _hann(frame.size)
    r = autocorrelation(y, order)
    r[0] *= 1.0 + WHITE_NOISE_CORRECTION
    return levinson_durbin(r)


def _check_state(model: LpcModel, state: FilterState) -> None:
    if state.order != model.order:
        raise PreconditionError(
            detail=f"Filter state holds {state.order} samples, model order is {model.order}"
        )


def inverse_filter(x, model: LpcModel, state: FilterState) -> Tuple[np.ndarray, FilterState]:
    """e = A(z) x with carried past inputs."""
    _check_state(model, state)
    x = np.asarray(x, dtype=np.float64)
    if model.order == 0:
        return x * model.coeffs[0], state
    zi = sps.lfiltic(model.coeffs, [1.0], y=[], x=state.memory[::-1])
    e, _ = sps.lfilter(model.coeffs, [1.0], x, zi=zi)
    history = np.concatenate([state.memory, x])[-model.order:]
    return e, FilterState(history)


def synthesis_filter(e, model: LpcModel, state: FilterState) -> Tuple[np.ndarray, FilterState]:
    """x = e / A(z) with carried past outputs; refuses unstable models."""
    _check_state(model, state)
    if not model.is_stable:
        raise StabilityError(detail="Synthesis model has a reflection coefficient with |k| >= 1")
    e = np.asarray(e, dtype=np.float64)
    if model.order == 0:
        return e.copy(), state
    zi = sps.lfiltic([1.0], model.coeffs, y=state.memory[::-1])
    x, _ = sps.lfilter([1.0], model.coeffs, e, zi=zi)
    history = np.concatenate([state.memory, x])[-model.order:]
    return x, FilterState(history)


# -------------------------------------------------
# Envelope grid
# -------------------------------------------------

def lpc_to_envelope(model: LpcModel, gain: float) -> EnvelopeSpectrum:
    spectrum = np.fft.rfft(model.coeffs, ENVELOPE_FFT)[:ENVELOPE_POINTS]
    power = np.maximum(np.abs(spectrum) ** 2, _POWER_FLOOR)
    level = max(float(gain) ** 2, _POWER_FLOOR)
    return EnvelopeSpectrum(10.0 * np.log10(level / power))


def envelope_to_lpc(env: EnvelopeSpectrum, order: int) -> LpcModel:
    if not 1 <= order <= 32:
        raise PreconditionError(detail=f"Envelope model order must lie in [1, 32], got {order}")
    points = np.asarray(env.points, dtype=np.float64)
    # Nyquist bin is not on the grid; the spectrum of a real filter is even about
    # it, so fit c + d (k - 64)^2 through the last two points
    nyquist_db = (4.0 * points[-1] - points[-2]) / 3.0
    half = 10.0 ** (np.concatenate([points, [nyquist_db]]) / 10.0)
    r = np.fft.irfft(half, n=ENVELOPE_FFT)[: order + 1]
    return levinson_durbin(r)


def frame_envelope(frame, order: int, preemph: float) -> Tuple[EnvelopeSpectrum, LpcModel]:
    """LPC envelope of a frame at per-sample level, so 8 and 16 kHz analyses share one dB scale."""
    model = lpc_analysis(frame, order, preemph)
    gain = np.sqrt(model.residual_energy / windowed_energy(np.asarray(frame).size))
    return lpc_to_envelope(model, gain), model


def envelope_at_rate(model: LpcModel, gain: float, sample_rate: int, points: int) -> np.ndarray:
    """Envelope of a model running at `sample_rate`, on the 125 Hz grid for the first `points` bins."""
    nfft = int(round(sample_rate / ENVELOPE_SPACING_HZ))
    spectrum = np.fft.rfft(model.coeffs, nfft)[:points]
    power = np.maximum(np.abs(spectrum) ** 2, _POWER_FLOOR)
    return 10.0 * np.log10(max(float(gain) ** 2, _POWER_FLOOR) / power)


def pre_emphasis_db(mu: float, sample_rate: int, points: int) -> np.ndarray:
    """Power response of 1 - mu z^-1 at `sample_rate` on the 125 Hz grid, dB."""
    f = np.arange(points) * ENVELOPE_SPACING_HZ
    w = 2.0 * np.pi * f / sample_rate
    return 10.0 * np.log10(np.maximum(1.0 + mu * mu - 2.0 * mu * np.cos(w), _POWER_FLOOR))
