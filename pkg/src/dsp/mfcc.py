"""
Mel-frequency cepstral coefficients of a 128-sample narrowband frame and the
18-component feature vector fed to the harmonic-gain predictor.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from dsp.lpc import hanning_window
from dsp.pitch import PitchInfo
from exceptions import PreconditionError

MFCC_FRAME = 128
MFCC_FFT = 256
MEL_BANDS = 24
MFCC_COUNT = 16
LOG_FLOOR = 1e-10
FEATURE_COUNT = MFCC_COUNT + 2
_SAMPLE_RATE = 8000


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@functools.lru_cache(maxsize=1)
def mel_filterbank() -> np.ndarray:
    """MEL_BANDS x (MFCC_FFT/2 + 1) triangular weights over 0-4 kHz.

    Each triangle reaches the centres of its neighbours (50% overlap).
    """
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(_SAMPLE_RATE / 2.0), MEL_BANDS + 2))
    freqs = np.arange(MFCC_FFT // 2 + 1) * _SAMPLE_RATE / MFCC_FFT
    bank = np.zeros((MEL_BANDS, freqs.size))
    for band in range(MEL_BANDS):
        lo, centre, hi = edges[band : band + 3]
        rising = (freqs - lo) / (centre - lo)
        falling = (hi - freqs) / (hi - centre)
        bank[band] = np.maximum(0.0, np.minimum(rising, falling))
    bank.setflags(write=False)
    return bank


def mfcc16(frame, include_c0: bool = True) -> np.ndarray:
    x = np.asarray(frame, dtype=np.float64)
    if x.size != MFCC_FRAME:
        raise PreconditionError(detail=f"MFCC frame must hold {MFCC_FRAME} samples, got {x.size}")
    spectrum = np.fft.rfft(x * hanning_window(MFCC_FRAME), MFCC_FFT)
    power = np.abs(spectrum) ** 2
    bands = np.log(np.maximum(mel_filterbank() @ power, LOG_FLOOR))
    cepstrum = dct(bands, type=2, norm="ortho")
    start = 0 if include_c0 else 1
    return cepstrum[start : start + MFCC_COUNT]


@dataclass(frozen=True, eq=False)
class FeatureVector:
    mfcc: np.ndarray
    pitch_gain: float
    pitch_delay: float

    def __post_init__(self):
        mfcc = np.array(self.mfcc, dtype=np.float64, copy=True).reshape(-1)
        if mfcc.size != MFCC_COUNT:
            raise PreconditionError(detail=f"Feature vector needs {MFCC_COUNT} cepstral coefficients")
        mfcc.setflags(write=False)
        object.__setattr__(self, "mfcc", mfcc)
        if not np.all(np.isfinite(self.as_array())):
            raise PreconditionError(detail="Feature vector must be finite")

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.mfcc, [self.pitch_gain, self.pitch_delay]])


def assemble_features(mfcc, p: PitchInfo) -> FeatureVector:
    return FeatureVector(mfcc, p.gain, p.delay)
