"""
Objective measures: envelope spectral distortion over 3-8 kHz, harmonic gain
error, band-limited SNR and windowed spectrum dumps.
"""
from __future__ import annotations

import logging
from typing import List, Sequence, Tuple

import numpy as np
from scipy import signal as sps

from codec.corpus import aligned_narrowband, iter_frames, load_irs
from codec.highband import decoded_envelope, encode_envelope, reference_envelope
from codec.mlp import MlpNetwork, forward
from codec.vq import Codebook
from dsp.lpc import EnvelopeSpectrum, hanning_window
from dsp.signal import AudioBuffer, band_filter
from exceptions import DegenerateInputError, PreconditionError, UndefinedSnrError
from schemas import CodecParams, DistortionReport

logger = logging.getLogger(__name__)

SD_BAND_HZ = (3000.0, 8000.0)
SNR_CAP_DB = 120.0
_POWER_FLOOR = 1e-20


def band_points(band: Tuple[float, float]) -> np.ndarray:
    """Grid indices k with 125 k Hz inside [low, high)."""
    freqs = EnvelopeSpectrum.frequencies()
    return np.flatnonzero((freqs >= band[0]) & (freqs < band[1]))


def spectral_distortion(
    env_ref: EnvelopeSpectrum, env_test: EnvelopeSpectrum, band: Tuple[float, float] = SD_BAND_HZ
) -> float:
    """RMS dB difference between two envelopes over the grid points inside `band`."""
    k = band_points(band)
    if k.size == 0:
        raise PreconditionError(detail=f"No envelope grid points inside {band[0]}-{band[1]} Hz")
    diff = env_ref.points[k] - env_test.points[k]
    return float(np.sqrt(np.mean(diff * diff)))


def distortion_report(per_frame: Sequence[float], band: Tuple[float, float] = SD_BAND_HZ) -> DistortionReport:
    values = [float(v) for v in per_frame]
    if not values:
        raise PreconditionError(detail="No frames to evaluate")
    return DistortionReport(
        per_frame=values,
        mean=float(np.mean(values)),
        median=float(np.median(values)),
        frame_count=len(values),
        band_hz=band,
    )


def envelope_distortions(wideband: AudioBuffer, cb: Codebook, params: CodecParams) -> List[float]:
    """Per-frame SD between each speech frame's own envelope and the receiver's reconstruction."""
    nb = aligned_narrowband(wideband, load_irs(params))
    values = []
    for frame in iter_frames(wideband, nb):
        if frame.level_dbfs < params.silence_dbfs:
            continue
        try:
            reference = reference_envelope(frame.wideband, params.preemph)
        except DegenerateInputError:
            continue
        code = encode_envelope(frame.wideband, cb, params.preemph)
        test = decoded_envelope(code, cb, frame.narrowband, params.preemph)
        values.append(spectral_distortion(reference, test))
    return values


def _pairs(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).reshape(-1, 2)
    if not np.all(np.isfinite(arr)):
        raise PreconditionError(detail=f"{name} gains must be finite")
    return arr


def harmonic_gain_error(predicted, target) -> float:
    """Mean absolute dB error over frames and both harmonics."""
    pred, tgt = _pairs(predicted, "Predicted"), _pairs(target, "Target")
    if pred.shape != tgt.shape:
        raise PreconditionError(detail=f"Got {pred.shape[0]} predictions for {tgt.shape[0]} targets")
    if tgt.shape[0] == 0:
        raise PreconditionError(detail="No voiced frames to evaluate")
    return float(np.mean(np.abs(pred - tgt)))


def constant_predictor_error(target) -> float:
    """Error of the best constant guess (per-harmonic median) on the same targets."""
    tgt = _pairs(target, "Target")
    if tgt.shape[0] == 0:
        raise PreconditionError(detail="No voiced frames to evaluate")
    return harmonic_gain_error(np.broadcast_to(np.median(tgt, axis=0), tgt.shape), tgt)


def predict_gains(net: MlpNetwork, features: np.ndarray) -> np.ndarray:
    return np.atleast_2d(forward(net, np.atleast_2d(features)))


def band_snr(x: AudioBuffer, y: AudioBuffer, band: Tuple[float, float]) -> float:
    """SNR of y against x restricted to `band`, capped at 120 dB."""
    if x.sample_rate != y.sample_rate or len(x) != len(y):
        raise PreconditionError(detail="band_snr needs buffers of equal rate and length")
    taps = band_filter(float(band[0]), float(band[1]), x.sample_rate).taps
    xb = sps.lfilter(taps, [1.0], x.samples)
    yb = sps.lfilter(taps, [1.0], y.samples)
    signal_energy = float(np.dot(xb, xb))
    if signal_energy <= 0.0:
        raise UndefinedSnrError(extra={"band_hz": list(band)})
    noise = xb - yb
    noise_energy = float(np.dot(noise, noise))
    if noise_energy <= 0.0:
        return SNR_CAP_DB
    return float(min(SNR_CAP_DB, 10.0 * np.log10(signal_energy / noise_energy)))


def dump_spectrum(
    x: AudioBuffer, at: float = 0.0, window_ms: float = 32.0, offset_db: float = 0.0
) -> Tuple[np.ndarray, np.ndarray]:
    """Hann-windowed one-sided periodogram starting at `at` seconds: (Hz, dB)."""
    length = int(round(window_ms * x.sample_rate / 1000.0))
    start = int(round(at * x.sample_rate))
    if length < 2 or start < 0 or start + length > len(x):
        raise PreconditionError(
            detail=f"Need {length} samples from {start} for a {window_ms} ms window, buffer has {len(x)}"
        )
    segment = x.samples[start : start + length] * hanning_window(length)
    power = np.abs(np.fft.rfft(segment)) ** 2 / length
    # fold the negative frequencies in; DC and Nyquist appear once
    power[1:] *= 2.0
    if length % 2 == 0:
        power[-1] /= 2.0
    freqs = np.fft.rfftfreq(length, d=1.0 / x.sample_rate)
    return freqs, 10.0 * np.log10(np.maximum(power, _POWER_FLOOR)) + offset_db
