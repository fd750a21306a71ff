"""
Low band (50-300 Hz): least-squares harmonic fits used as training targets,
and the phase-continuous two-harmonic oscillator used by the receiver.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg as sla
from scipy import signal as sps

from dsp.lpc import hanning_window
from dsp.pitch import PitchInfo
from dsp.signal import WIDEBAND_RATE, AudioBuffer, FirFilter
from exceptions import DegenerateInputError, PreconditionError

BASIS_LENGTH = 128
TARGET_FRAME = 256
LOWBAND_MIN_HZ = 50.0
LOWBAND_MAX_HZ = 300.0
CROSSFADE_SAMPLES = 64
VOICING_THRESHOLD = 0.3
AMPLITUDE_FLOOR = 1e-10
MAX_CONDITION = 1e12

# band-limiting before decimation: flat to 350 Hz, 80 dB down from 950 Hz
_TARGET_PASS_HZ = 350.0
_TARGET_STOP_HZ = 950.0
_TARGET_ATTENUATION_DB = 80.0
_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class HarmonicBasis:
    matrix: np.ndarray  # 128 x 5: window, sin/cos at 1/T, sin/cos at 2/T
    period: float


@dataclass(frozen=True, eq=False)
class HarmonicAmplitudes:
    coeffs: np.ndarray  # DC, sin1, cos1, sin2, cos2

    @property
    def amp1(self) -> float:
        return float(np.hypot(self.coeffs[1], self.coeffs[2]))

    @property
    def amp2(self) -> float:
        return float(np.hypot(self.coeffs[3], self.coeffs[4]))

    @property
    def gains_db(self) -> np.ndarray:
        amps = np.array([self.amp1, self.amp2])
        return 20.0 * np.log10(amps + AMPLITUDE_FLOOR)


@dataclass(frozen=True)
class OscillatorState:
    phases: Tuple[float, float] = (0.0, 0.0)
    prev_gains: Tuple[float, float] = (0.0, 0.0)  # linear


def build_basis(period: float, length: int = BASIS_LENGTH) -> HarmonicBasis:
    if not 4.0 <= period <= 2.0 * length:
        raise PreconditionError(detail=f"Pitch period {period} outside [4, {2 * length}] samples")
    n = np.arange(length)
    w = hanning_window(length)
    w1 = _TWO_PI * n / period
    matrix = np.column_stack([w, w * np.sin(w1), w * np.cos(w1), w * np.sin(2.0 * w1), w * np.cos(2.0 * w1)])
    return HarmonicBasis(matrix, float(period))


def ls_fit(basis: HarmonicBasis, y) -> HarmonicAmplitudes:
    """Normal-equation solve of min ||X a - y|| with one refinement step."""
    y = np.asarray(y, dtype=np.float64)
    x = basis.matrix
    if y.shape != (x.shape[0],):
        raise PreconditionError(detail=f"Fit target must hold {x.shape[0]} samples, got {y.size}")
    gram = x.T @ x
    if np.linalg.cond(gram) > MAX_CONDITION:
        raise DegenerateInputError(detail=f"Harmonic basis is singular for period {basis.period}")
    factor = sla.cho_factor(gram)
    rhs = x.T @ y
    a = sla.cho_solve(factor, rhs)
    a += sla.cho_solve(factor, rhs - gram @ a)
    return HarmonicAmplitudes(a)


@functools.lru_cache(maxsize=1)
def target_filter() -> FirFilter:
    width = (_TARGET_STOP_HZ - _TARGET_PASS_HZ) / (WIDEBAND_RATE / 2.0)
    numtaps, beta = sps.kaiserord(_TARGET_ATTENUATION_DB, width)
    numtaps |= 1
    taps = sps.firwin(numtaps, (_TARGET_PASS_HZ + _TARGET_STOP_HZ) / 2.0, window=("kaiser", beta), fs=WIDEBAND_RATE)
    return FirFilter(taps, f"harmonic target lowpass {numtaps} taps")


def extract_targets(
    frame,
    pitch: PitchInfo,
    *,
    history=None,
    rectify: bool = False,
    voicing_threshold: float = VOICING_THRESHOLD,
) -> Optional[HarmonicAmplitudes]:
    """Harmonic amplitudes of a 256-sample 16 kHz frame, or None when it is not a target.

    `history` is the preceding 256 samples and primes the band-limiting filter.
    With `rectify` the absolute value of the signal is fitted instead.
    """
    x = np.asarray(frame, dtype=np.float64)
    if x.size != TARGET_FRAME:
        raise PreconditionError(detail=f"Target frame must hold {TARGET_FRAME} samples, got {x.size}")
    past = np.zeros(TARGET_FRAME) if history is None else np.asarray(history, dtype=np.float64)
    if past.size != TARGET_FRAME:
        raise PreconditionError(detail=f"Target history must hold {TARGET_FRAME} samples, got {past.size}")
    if pitch.gain < voicing_threshold or not np.any(x):
        return None

    joined = np.concatenate([past, x])
    if rectify:
        joined = np.abs(joined)
    band = sps.lfilter(target_filter().taps, [1.0], joined)[-TARGET_FRAME:]
    decimated = band[::2] * hanning_window(BASIS_LENGTH)
    return ls_fit(build_basis(pitch.delay), decimated)


# -------------------------------------------------
# Synthesis
# -------------------------------------------------

def emitted_harmonics(f0: float) -> Tuple[bool, bool]:
    """Harmonic k sounds when the fundamental lies in the band and k*f0 <= 300 Hz."""
    if not LOWBAND_MIN_HZ <= f0 <= LOWBAND_MAX_HZ:
        return False, False
    return True, 2.0 * f0 <= LOWBAND_MAX_HZ


def _advance(phase: float, increment: float, length: int) -> Tuple[np.ndarray, float]:
    # sequential accumulation keeps split calls identical to one long call
    out = np.empty(length)
    for n in range(length):
        out[n] = phase
        phase += increment
        if phase >= _TWO_PI:
            phase -= _TWO_PI
    return out, phase


def synthesize_lowband(
    f0: float,
    gains_db,
    state: OscillatorState,
    *,
    length: int = TARGET_FRAME,
    voicing: float = 1.0,
    voicing_threshold: float = VOICING_THRESHOLD,
) -> Tuple[AudioBuffer, OscillatorState]:
    if not (np.isfinite(f0) and f0 > 0.0):
        raise PreconditionError(detail=f"Fundamental must be positive, got {f0}")
    gains_db = np.asarray(gains_db, dtype=np.float64)
    if gains_db.shape != (2,) or not np.all(np.isfinite(gains_db)):
        raise PreconditionError(detail="Need two finite harmonic gains in dB")

    emitted = emitted_harmonics(f0)
    voiced = voicing >= voicing_threshold
    targets = [10.0 ** (g / 20.0) if (on and voiced) else 0.0 for g, on in zip(gains_db, emitted)]
    ramp = np.minimum(1.0, (np.arange(length) + 1.0) / CROSSFADE_SAMPLES)

    out = np.zeros(length)
    phases = []
    for k, (phase, prev, target) in enumerate(zip(state.phases, state.prev_gains, targets), start=1):
        inc = _TWO_PI * k * f0 / WIDEBAND_RATE
        track, phase = _advance(phase, inc, length)
        phases.append(phase)
        gain = np.where(ramp >= 1.0, target, prev + (target - prev) * ramp)
        if np.any(gain):
            out += gain * np.sin(track)
    return AudioBuffer(out, WIDEBAND_RATE), OscillatorState(tuple(phases), tuple(targets))
