"""
High band (3.4-8 kHz): excitation extension by rectification, whitening,
gain matching, envelope coding against the 40-point codebook and synthesis.
"""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy import signal as sps

from codec.vq import ENVELOPE_DIM, Codebook, decode_index, quantize
from dsp.lpc import (
    ENVELOPE_POINTS,
    NARROWBAND_ORDER,
    WIDEBAND_ORDER,
    EnvelopeSpectrum,
    FilterState,
    LpcModel,
    de_emphasis,
    envelope_at_rate,
    envelope_to_lpc,
    frame_envelope,
    inverse_filter,
    lpc_analysis,
    pre_emphasis,
    pre_emphasis_db,
    synthesis_filter,
    windowed_energy,
)
from dsp.signal import (
    NARROWBAND_RATE,
    WIDEBAND_RATE,
    AudioBuffer,
    FirFilter,
    FirState,
    ResamplerState,
    fir_stream,
    new_resampler_state,
    resampler_delay,
    upsample_stream,
)
from exceptions import DegenerateInputError, PreconditionError

logger = logging.getLogger(__name__)

ENVELOPE_FRAME = 256
NARROWBAND_FRAME = 128
LOCAL_POINTS = ENVELOPE_POINTS - ENVELOPE_DIM  # k = 0..23 come from the receiver
ANCHOR = slice(LOCAL_POINTS - 4, LOCAL_POINTS)  # k = 20..23

GAIN_MATCH_TAPS = 127
GAIN_MATCH_CUTOFF_HZ = 3400.0
_HIGHPASS_STOP_HZ = 3400.0
_HIGHPASS_PASS_HZ = 3600.0
_HIGHPASS_ATTENUATION_DB = 60.0

# 8 kHz envelopes spread the frame power over 4 kHz, 16 kHz ones over 8 kHz
_RATE_OFFSET_DB = 10.0 * np.log10(WIDEBAND_RATE / NARROWBAND_RATE)


@dataclass(frozen=True)
class HighbandFrameCode:
    index: int


@functools.lru_cache(maxsize=1)
def gain_match_filter() -> FirFilter:
    taps = sps.firwin(GAIN_MATCH_TAPS, GAIN_MATCH_CUTOFF_HZ, window=("kaiser", 8.0), fs=WIDEBAND_RATE)
    return FirFilter(taps, f"gain-match lowpass {GAIN_MATCH_TAPS} taps")


@functools.lru_cache(maxsize=1)
def highpass_filter() -> FirFilter:
    width = (_HIGHPASS_PASS_HZ - _HIGHPASS_STOP_HZ) / (WIDEBAND_RATE / 2.0)
    numtaps, beta = sps.kaiserord(_HIGHPASS_ATTENUATION_DB, width)
    numtaps |= 1
    cutoff = (_HIGHPASS_STOP_HZ + _HIGHPASS_PASS_HZ) / 2.0
    taps = sps.firwin(numtaps, cutoff, window=("kaiser", beta), pass_zero=False, fs=WIDEBAND_RATE)
    return FirFilter(taps, f"band split highpass {numtaps} taps")


# -------------------------------------------------
# Excitation chain
# -------------------------------------------------

def extend_excitation(exc: AudioBuffer) -> AudioBuffer:
    exc.require_rate(WIDEBAND_RATE)
    return AudioBuffer(np.abs(exc.samples), WIDEBAND_RATE)


def whiten(
    extended: AudioBuffer, state: FilterState, order: int = WIDEBAND_ORDER
) -> Tuple[AudioBuffer, FilterState, bool]:
    """Inverse-filter one frame with its own LPC fit (no pre-emphasis).

    Returns the output, the carried input memory and whether the frame was
    degenerate and passed through unchanged.
    """
    x = extended.samples
    try:
        model = lpc_analysis(x, order, 0.0)
    except DegenerateInputError:
        history = np.concatenate([state.memory, x])[-order:]
        return extended, FilterState(history), True
    e, state = inverse_filter(x, model, state)
    return AudioBuffer(e, extended.sample_rate), state, False


def _band_energy(x: np.ndarray) -> float:
    low = sps.lfilter(gain_match_filter().taps, [1.0], x)
    return float(np.dot(low, low))


def gain_match(whitened: AudioBuffer, reference: AudioBuffer) -> AudioBuffer:
    """Scale `whitened` so its 0-3.4 kHz energy equals that of `reference`."""
    if len(whitened) != len(reference):
        raise PreconditionError(detail="gain_match needs frames of equal length")
    target = _band_energy(reference.samples)
    current = _band_energy(whitened.samples)
    if current <= 0.0:
        return AudioBuffer(np.zeros(len(whitened)), whitened.sample_rate)
    return AudioBuffer(whitened.samples * np.sqrt(target / current), whitened.sample_rate)


# -------------------------------------------------
# Envelope coding
# -------------------------------------------------

def highband_vector(frame, preemph: float = 0.7) -> np.ndarray:
    """Level-normalized 40-point high-band envelope of a 256-sample wideband frame."""
    x = np.asarray(frame, dtype=np.float64)
    if x.size != ENVELOPE_FRAME:
        raise PreconditionError(detail=f"Envelope frame must hold {ENVELOPE_FRAME} samples, got {x.size}")
    # silent once windowed: all-zero frames, or energy only where the window vanishes
    try:
        env, _ = frame_envelope(x, WIDEBAND_ORDER, preemph)
    except DegenerateInputError:
        return np.zeros(ENVELOPE_DIM)
    return env.points[LOCAL_POINTS:] - env.points[ANCHOR].mean()


def reference_envelope(frame, preemph: float = 0.7) -> EnvelopeSpectrum:
    env, _ = frame_envelope(np.asarray(frame, dtype=np.float64), WIDEBAND_ORDER, preemph)
    return env


def encode_envelope(frame, cb: Codebook, preemph: float = 0.7) -> HighbandFrameCode:
    return HighbandFrameCode(quantize(cb, highband_vector(frame, preemph)))


def local_envelope(nb_frame, preemph: float = 0.7) -> Tuple[np.ndarray, LpcModel]:
    """Receiver-side envelope on k = 0..23, on the wideband pre-emphasis and level scale."""
    x = np.asarray(nb_frame, dtype=np.float64)
    if x.size != NARROWBAND_FRAME:
        raise PreconditionError(detail=f"Narrowband frame must hold {NARROWBAND_FRAME} samples, got {x.size}")
    try:
        model = lpc_analysis(x, NARROWBAND_ORDER, preemph)
    except DegenerateInputError:
        model = LpcModel.flat(NARROWBAND_ORDER, 0.0)
    gain = np.sqrt(model.residual_energy / windowed_energy(x.size))
    env = envelope_at_rate(model, gain, NARROWBAND_RATE, LOCAL_POINTS)
    env += pre_emphasis_db(preemph, WIDEBAND_RATE, LOCAL_POINTS) - pre_emphasis_db(
        preemph, NARROWBAND_RATE, LOCAL_POINTS
    )
    return env + _RATE_OFFSET_DB, model


def decoded_envelope(code: HighbandFrameCode, cb: Codebook, nb_frame, preemph: float = 0.7) -> EnvelopeSpectrum:
    if cb.dim != ENVELOPE_DIM:
        raise PreconditionError(detail=f"Codebook dimension {cb.dim} does not match the {ENVELOPE_DIM}-point band")
    codeword = decode_index(cb, code.index)
    local, _ = local_envelope(nb_frame, preemph)
    return EnvelopeSpectrum(np.concatenate([local, codeword + local[ANCHOR].mean()]))


def decode_envelope(code: HighbandFrameCode, cb: Codebook, nb_frame, preemph: float = 0.7) -> LpcModel:
    """Full-band order-16 model B(z) from the local narrowband envelope and the decoded codeword."""
    return envelope_to_lpc(decoded_envelope(code, cb, nb_frame, preemph), WIDEBAND_ORDER)


# -------------------------------------------------
# Synthesis
# -------------------------------------------------

@dataclass(frozen=True, eq=False)
class SynthesisState:
    synthesis: FilterState = field(default_factory=lambda: FilterState.zeros(WIDEBAND_ORDER))
    deemphasis_last: float = 0.0
    highpass: FirState = field(default_factory=lambda: FirState.zeros(highpass_filter()))


def synthesize_highband(
    excitation: AudioBuffer, model: LpcModel, state: SynthesisState, preemph: float = 0.7
) -> Tuple[AudioBuffer, SynthesisState]:
    """1/B(z), de-emphasis, then the band-split high-pass."""
    excitation.require_rate(WIDEBAND_RATE)
    shaped, synth = synthesis_filter(excitation.samples, model, state.synthesis)
    flat, last = de_emphasis(shaped, preemph, state.deemphasis_last)
    band, hp = fir_stream(flat, highpass_filter(), state.highpass)
    return AudioBuffer(band, WIDEBAND_RATE), SynthesisState(synth, last, hp)


@dataclass(frozen=True, eq=False)
class HighbandState:
    """Every memory of the receiver's high-band path for one stream."""
    emphasis_last: float = 0.0
    inverse: FilterState = field(default_factory=lambda: FilterState.zeros(NARROWBAND_ORDER))
    resampler: ResamplerState = field(default_factory=new_resampler_state)
    whitening: FilterState = field(default_factory=lambda: FilterState.zeros(WIDEBAND_ORDER))
    synthesis: SynthesisState = field(default_factory=SynthesisState)


def path_delay() -> int:
    """Delay of the regenerated high band against the narrowband timeline, 16 kHz samples."""
    return resampler_delay() + int(highpass_filter().group_delay)


def regenerate_highband(
    nb_frame,
    code: HighbandFrameCode,
    cb: Codebook,
    state: HighbandState,
    preemph: float = 0.7,
) -> Tuple[np.ndarray, HighbandState, bool]:
    """Run the receiver's high-band chain on one 128-sample narrowband frame.

    Returns 256 samples at 16 kHz, the new state and the whitening
    pass-through flag.
    """
    x = np.asarray(nb_frame, dtype=np.float64)
    emphasized = pre_emphasis(x, preemph, state.emphasis_last)
    try:
        analysis = lpc_analysis(x, NARROWBAND_ORDER, preemph)
    except DegenerateInputError:
        analysis = LpcModel.flat(NARROWBAND_ORDER)
    excitation8, inverse = inverse_filter(emphasized, analysis, state.inverse)
    excitation16, resampler = upsample_stream(excitation8, state.resampler)
    reference = AudioBuffer(excitation16, WIDEBAND_RATE)

    extended = extend_excitation(reference)
    whitened, whitening, passthrough = whiten(extended, state.whitening)
    matched = gain_match(whitened, reference)

    model = decode_envelope(code, cb, x, preemph)
    power = float(np.mean(excitation8 ** 2)) if excitation8.size else 0.0
    # envelope level is spread over 8 kHz, the excitation over 4 kHz
    scale = np.sqrt(model.residual_energy * NARROWBAND_RATE / (WIDEBAND_RATE * power)) if power > 0.0 else 0.0
    excitation = AudioBuffer(matched.samples * scale, WIDEBAND_RATE)
    band, synthesis = synthesize_highband(excitation, model, state.synthesis, preemph)

    new_state = HighbandState(float(x[-1]) if x.size else state.emphasis_last, inverse, resampler,
                              whitening, synthesis)
    return band.samples, new_state, passthrough
