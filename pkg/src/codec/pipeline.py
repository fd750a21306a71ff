"""
Frame scheduler: the transmit path (downsample + envelope indices) and the
receive path (narrowband + regenerated low band + regenerated high band).

Frames are 256 samples at 16 kHz, i.e. 128 narrowband samples, with no overlap.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from codec.highband import HighbandFrameCode, HighbandState, highband_vector, path_delay, regenerate_highband
from codec.lowband import OscillatorState, synthesize_lowband
from codec.mlp import MlpNetwork, forward
from codec.vq import Codebook, quantize_many
from dsp.mfcc import assemble_features, mfcc16
from dsp.pitch import DOUBLING_THRESHOLD, estimate_pitch
from dsp.signal import (
    NARROWBAND_RATE,
    WIDEBAND_RATE,
    AudioBuffer,
    DelayState,
    FirFilter,
    FirState,
    ResamplerState,
    apply_fir,
    delay_stream,
    downsample_2x,
    fir_stream,
    new_resampler_state,
    resampler_delay,
    upsample_stream,
)
from exceptions import CodebookError, PreconditionError, StreamError

logger = logging.getLogger(__name__)

FRAME_SIZE = 256
NARROWBAND_FRAME = FRAME_SIZE // 2
SIDEINFO_VERSION = 2
MAX_INDEX = 255


@dataclass(frozen=True, eq=False)
class SideInfoStream:
    codebook_hash: int
    indices: bytes = b""
    version: int = SIDEINFO_VERSION
    frame_size: int = FRAME_SIZE
    sample_rate: int = WIDEBAND_RATE

    @property
    def frame_count(self) -> int:
        return len(self.indices)

    @property
    def duration(self) -> float:
        """Nominal duration covered by the frames, seconds."""
        return self.frame_count * self.frame_size / float(self.sample_rate)

    @property
    def bit_rate(self) -> float:
        return 8.0 * self.sample_rate / self.frame_size


def frame_count(samples: int, frame: int = FRAME_SIZE) -> int:
    return math.ceil(samples / frame)


# -------------------------------------------------
# Transmit path
# -------------------------------------------------

def encode(
    wideband: AudioBuffer,
    cb: Codebook,
    *,
    preemph: float = 0.7,
    irs: Optional[FirFilter] = None,
) -> Tuple[AudioBuffer, SideInfoStream]:
    wideband.require_rate(WIDEBAND_RATE)
    if cb.size > MAX_INDEX + 1:
        raise PreconditionError(detail=f"Codebook of size {cb.size} does not fit one byte per frame")
    narrowband = downsample_2x(wideband)
    if irs is not None:
        narrowband = apply_fir(narrowband, irs)

    count = frame_count(len(wideband))
    padded = np.zeros(count * FRAME_SIZE)
    padded[: len(wideband)] = wideband.samples
    vectors = np.array([highband_vector(frame, preemph) for frame in padded.reshape(count, FRAME_SIZE)])
    indices = bytes(quantize_many(cb, vectors).astype(np.uint8)) if count else b""
    logger.debug("pipeline.encoded", extra={"frames": count, "samples": len(wideband)})
    return narrowband, SideInfoStream(cb.content_hash, indices)


# -------------------------------------------------
# Receive path
# -------------------------------------------------

@dataclass(frozen=True, eq=False)
class StreamState:
    """Every carried memory of one decoded stream."""
    upsampler: ResamplerState = field(default_factory=new_resampler_state)
    irs: Optional[FirState] = None
    pitch_history: np.ndarray = field(default_factory=lambda: np.zeros(NARROWBAND_FRAME))
    oscillator: OscillatorState = field(default_factory=OscillatorState)
    highband: HighbandState = field(default_factory=HighbandState)
    narrowband_delay: DelayState = field(default_factory=lambda: DelayState.zeros(0))
    lowband_delay: DelayState = field(default_factory=lambda: DelayState.zeros(0))
    last_index: int = 0

    def reset(self) -> "StreamState":
        return StreamState(
            irs=None if self.irs is None else FirState(np.zeros_like(self.irs.zi)),
            narrowband_delay=DelayState.zeros(self.narrowband_delay.buffer.size),
            lowband_delay=DelayState.zeros(self.lowband_delay.buffer.size),
        )


class Decoder:
    """Receiver bound to one codebook and one harmonic-gain network."""

    def __init__(
        self,
        cb: Codebook,
        net: MlpNetwork,
        *,
        preemph: float = 0.7,
        doubling_threshold: float = DOUBLING_THRESHOLD,
        voicing_threshold: float = 0.3,
        irs: Optional[FirFilter] = None,
    ):
        self.cb = cb
        self.net = net
        self.preemph = preemph
        self.doubling_threshold = doubling_threshold
        self.voicing_threshold = voicing_threshold
        self.irs = irs
        # the network fixes which cepstral coefficients it was trained on
        self.include_c0 = net.mfcc_tag != "mfcc-c1"

    @property
    def latency(self) -> int:
        """Output delay against the narrowband input, 16 kHz samples."""
        return path_delay()

    def new_state(self) -> StreamState:
        return StreamState(
            irs=None if self.irs is None else FirState.zeros(self.irs),
            narrowband_delay=DelayState.zeros(self.latency - resampler_delay()),
            lowband_delay=DelayState.zeros(self.latency),
        )

    def decode_frame(self, nb_frame, index: int, state: StreamState) -> Tuple[np.ndarray, StreamState]:
        """256 output samples for 128 narrowband samples (shorter frames are zero-padded)."""
        x = np.zeros(NARROWBAND_FRAME)
        chunk = np.asarray(nb_frame, dtype=np.float64)
        if chunk.size > NARROWBAND_FRAME:
            raise PreconditionError(detail=f"Narrowband frame holds at most {NARROWBAND_FRAME} samples")
        x[: chunk.size] = chunk
        irs_state = state.irs
        if self.irs is not None:
            x, irs_state = fir_stream(x, self.irs, irs_state or FirState.zeros(self.irs))

        upsampled, upsampler = upsample_stream(x, state.upsampler)

        pitch = estimate_pitch(np.concatenate([state.pitch_history, x]), self.doubling_threshold)
        features = assemble_features(mfcc16(x, self.include_c0), pitch)
        gains = forward(self.net, features)
        low, oscillator = synthesize_lowband(
            pitch.f0, gains, state.oscillator, voicing=pitch.gain, voicing_threshold=self.voicing_threshold
        )

        high, highband, _ = regenerate_highband(
            x, HighbandFrameCode(int(index)), self.cb, state.highband, self.preemph
        )

        narrow, nb_delay = delay_stream(upsampled, state.narrowband_delay)
        lowband, low_delay = delay_stream(low.samples, state.lowband_delay)
        out = narrow + lowband + high
        new_state = StreamState(upsampler, irs_state, x.copy(), oscillator, highband, nb_delay, low_delay, int(index))
        return out, new_state

    def decode(self, narrowband: AudioBuffer, side: SideInfoStream) -> AudioBuffer:
        narrowband.require_rate(NARROWBAND_RATE)
        if side.codebook_hash != self.cb.content_hash:
            raise CodebookError(
                extra={"stream": f"{side.codebook_hash:016x}", "codebook": f"{self.cb.content_hash:016x}"}
            )
        count = frame_count(len(narrowband), NARROWBAND_FRAME)
        if abs(count - side.frame_count) > 1:
            raise StreamError(
                detail=f"Narrowband has {count} frames but side info has {side.frame_count}",
                extra={"narrowband_frames": count, "side_frames": side.frame_count},
            )

        state = self.new_state()
        blocks = []
        for i in range(count):
            index = side.indices[i] if i < side.frame_count else state.last_index
            block, state = self.decode_frame(
                narrowband.samples[i * NARROWBAND_FRAME : (i + 1) * NARROWBAND_FRAME], index, state
            )
            blocks.append(block)
        out = np.concatenate(blocks) if blocks else np.zeros(0)
        logger.debug("pipeline.decoded", extra={"frames": count, "latency": self.latency})
        return AudioBuffer(out[: 2 * len(narrowband)], WIDEBAND_RATE)


def decode(
    narrowband: AudioBuffer,
    side: SideInfoStream,
    cb: Codebook,
    net: MlpNetwork,
    **options,
) -> AudioBuffer:
    return Decoder(cb, net, **options).decode(narrowband, side)
