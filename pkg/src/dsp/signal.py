"""
Audio buffers, FIR filtering and 2x sample-rate conversion between the
8 kHz narrowband and 16 kHz wideband domains.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
from scipy import signal as sps

from exceptions import PreconditionError

NARROWBAND_RATE = 8000
WIDEBAND_RATE = 16000
SAMPLE_RATES = (NARROWBAND_RATE, WIDEBAND_RATE)

# Resampler design targets: flat to 3.4 kHz, 70 dB down from 4.1 kHz at 16 kHz.
_RESAMPLER_ATTENUATION_DB = 70.0
_RESAMPLER_PASS_HZ = 3400.0
_RESAMPLER_STOP_HZ = 4100.0


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Mono real samples in [-1, 1] at 8 or 16 kHz. Immutable."""
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate not in SAMPLE_RATES:
            raise PreconditionError(
                detail=f"Unsupported sample rate {self.sample_rate} Hz",
                extra={"allowed": list(SAMPLE_RATES)},
            )
        samples = _frozen_array(self.samples)
        if not np.all(np.isfinite(samples)):
            raise PreconditionError(detail="Audio samples must be finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration(self) -> float:
        return len(self) / float(self.sample_rate)

    def require_rate(self, rate: int) -> "AudioBuffer":
        if self.sample_rate != rate:
            raise PreconditionError(
                detail=f"Expected a {rate} Hz buffer, got {self.sample_rate} Hz"
            )
        return self


@dataclass(frozen=True, eq=False)
class FirFilter:
    taps: np.ndarray
    description: str = ""

    def __post_init__(self):
        taps = _frozen_array(self.taps)
        if taps.size < 1:
            raise PreconditionError(detail="FIR filter needs at least one tap")
        if not np.all(np.isfinite(taps)):
            raise PreconditionError(detail="FIR taps must be finite")
        object.__setattr__(self, "taps", taps)

    @property
    def group_delay(self) -> float:
        """Delay of a linear-phase filter, in samples at its own rate."""
        return (self.taps.size - 1) / 2.0

    @classmethod
    def identity(cls, description: str = "pass-through") -> "FirFilter":
        return cls(np.array([1.0]), description)


@dataclass(frozen=True, eq=False)
class FirState:
    """Direct-form state of a streaming FIR (len(taps) - 1 values)."""
    zi: np.ndarray

    @classmethod
    def zeros(cls, filt: FirFilter) -> "FirState":
        return cls(np.zeros(max(filt.taps.size - 1, 0)))


@dataclass(frozen=True, eq=False)
class DelayState:
    """Look-back buffer holding the last `delay` input samples."""
    buffer: np.ndarray

    @classmethod
    def zeros(cls, delay: int) -> "DelayState":
        return cls(np.zeros(int(delay)))


@dataclass(frozen=True, eq=False)
class ResamplerState:
    fir: FirState


def apply_fir(buf: AudioBuffer, filt: FirFilter) -> AudioBuffer:
    """Linear convolution truncated to the input length."""
    if len(buf) == 0:
        return buf
    out = sps.lfilter(filt.taps, [1.0], buf.samples)
    return AudioBuffer(out, buf.sample_rate)


def fir_stream(x: np.ndarray, filt: FirFilter, state: FirState) -> Tuple[np.ndarray, FirState]:
    if filt.taps.size == 1:
        return filt.taps[0] * np.asarray(x, dtype=np.float64), state
    if state.zi.size != filt.taps.size - 1:
        raise PreconditionError(detail="FIR state does not match the filter length")
    y, zf = sps.lfilter(filt.taps, [1.0], np.asarray(x, dtype=np.float64), zi=state.zi)
    return y, FirState(zf)


def delay_stream(x: np.ndarray, state: DelayState) -> Tuple[np.ndarray, DelayState]:
    if state.buffer.size == 0:
        return np.asarray(x, dtype=np.float64), state
    joined = np.concatenate([state.buffer, np.asarray(x, dtype=np.float64)])
    n = len(x)
    return joined[:n], DelayState(joined[n:])


# -------------------------------------------------
# Resampling
# -------------------------------------------------

@functools.lru_cache(maxsize=1)
def resampler_filter() -> FirFilter:
    """Kaiser-windowed sinc low-pass at 16 kHz shared by both converters."""
    width = (_RESAMPLER_STOP_HZ - _RESAMPLER_PASS_HZ) / (WIDEBAND_RATE / 2.0)
    numtaps, beta = sps.kaiserord(_RESAMPLER_ATTENUATION_DB, width)
    numtaps |= 1
    cutoff = (_RESAMPLER_PASS_HZ + _RESAMPLER_STOP_HZ) / 2.0
    taps = sps.firwin(numtaps, cutoff, window=("kaiser", beta), fs=WIDEBAND_RATE)
    return FirFilter(taps, f"resampler lowpass {numtaps} taps, kaiser beta={beta:.2f}")


def resampler_delay() -> int:
    """Group delay of either converter in 16 kHz samples."""
    return int(resampler_filter().group_delay)


def upsample_2x(buf: AudioBuffer) -> AudioBuffer:
    buf.require_rate(NARROWBAND_RATE)
    n = len(buf)
    if n == 0:
        return AudioBuffer(np.zeros(0), WIDEBAND_RATE)
    taps = 2.0 * resampler_filter().taps
    out = sps.upfirdn(taps, buf.samples, up=2)[: 2 * n]
    return AudioBuffer(out, WIDEBAND_RATE)


def downsample_2x(buf: AudioBuffer) -> AudioBuffer:
    buf.require_rate(WIDEBAND_RATE)
    n = len(buf)
    if n < 2:
        return AudioBuffer(np.zeros(0), NARROWBAND_RATE)
    out = sps.upfirdn(resampler_filter().taps, buf.samples, down=2)[: n // 2]
    return AudioBuffer(out, NARROWBAND_RATE)


def new_resampler_state() -> ResamplerState:
    return ResamplerState(FirState.zeros(resampler_filter()))


def upsample_stream(x: np.ndarray, state: ResamplerState) -> Tuple[np.ndarray, ResamplerState]:
    """Frame-wise 8 -> 16 kHz conversion; chunks concatenate to the one-shot result."""
    x = np.asarray(x, dtype=np.float64)
    stuffed = np.zeros(2 * x.size)
    stuffed[::2] = x
    filt = resampler_filter()
    y, zf = sps.lfilter(2.0 * filt.taps, [1.0], stuffed, zi=state.fir.zi)
    return y, ResamplerState(FirState(zf))


# -------------------------------------------------
# Filter design helpers
# -------------------------------------------------

def design_fir_from_response(
    freqs_hz: Sequence[float],
    gains_db: Sequence[float],
    numtaps: int,
    sample_rate: int = NARROWBAND_RATE,
    description: str = "",
) -> FirFilter:
    """Frequency-sampling design from a magnitude table (e.g. an inverse shaping curve).

    The table is extended to 0 Hz and Nyquist by holding the end values.
    """
    freqs = np.asarray(freqs_hz, dtype=np.float64)
    gains = np.asarray(gains_db, dtype=np.float64)
    nyquist = sample_rate / 2.0
    if freqs.size == 0 or freqs.size != gains.size:
        raise PreconditionError(detail="Frequency and gain tables must be non-empty and equal length")
    if np.any(np.diff(freqs) <= 0) or freqs[0] < 0 or freqs[-1] > nyquist:
        raise PreconditionError(detail="Frequencies must increase within [0, Nyquist]")
    if numtaps < 3 or numtaps % 2 == 0:
        raise PreconditionError(detail="numtaps must be odd and at least 3")
    if freqs[0] > 0:
        freqs = np.concatenate([[0.0], freqs])
        gains = np.concatenate([[gains[0]], gains])
    if freqs[-1] < nyquist:
        freqs = np.concatenate([freqs, [nyquist]])
        gains = np.concatenate([gains, [gains[-1]]])
    taps = sps.firwin2(numtaps, freqs, 10.0 ** (gains / 20.0), fs=sample_rate)
    return FirFilter(taps, description or f"frequency-sampled {numtaps} taps")


@functools.lru_cache(maxsize=8)
def band_filter(low_hz: float, high_hz: float, sample_rate: int, transition_hz: float = 150.0,
                attenuation_db: float = 80.0) -> FirFilter:
    """Linear-phase band selector; a zero low edge gives a low-pass, a Nyquist high edge a high-pass."""
    nyquist = sample_rate / 2.0
    if not 0.0 <= low_hz < high_hz <= nyquist:
        raise PreconditionError(detail=f"Invalid band [{low_hz}, {high_hz}] Hz")
    numtaps, beta = sps.kaiserord(attenuation_db, transition_hz / nyquist)
    numtaps |= 1
    window = ("kaiser", beta)
    if low_hz <= 0.0 and high_hz >= nyquist:
        taps = np.zeros(numtaps)
        taps[numtaps // 2] = 1.0
    elif low_hz <= 0.0:
        taps = sps.firwin(numtaps, high_hz, window=window, fs=sample_rate)
    elif high_hz >= nyquist:
        taps = sps.firwin(numtaps, low_hz, window=window, pass_zero=False, fs=sample_rate)
    else:
        taps = sps.firwin(numtaps, [low_hz, high_hz], window=window, pass_zero=False, fs=sample_rate)
    return FirFilter(taps, f"band {low_hz:g}-{high_hz:g} Hz")
