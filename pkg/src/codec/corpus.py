"""
Training and evaluation corpora: manifest files, silence gating, frame
alignment between the wideband original and its narrowband rendering, and
extraction of envelope vectors and harmonic training samples.
"""
from __future__ import annotations

import functools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, List, Optional, Sequence, TypeVar, Union

import numpy as np

from backend.fir_file import read_fir_taps
from backend.wav_file import read_wav
from codec.highband import highband_vector
from codec.lowband import extract_targets
from codec.mlp import TrainingSample
from codec.vq import ENVELOPE_DIM
from dsp.mfcc import FeatureVector, assemble_features, mfcc16
from dsp.pitch import estimate_pitch
from dsp.signal import (
    WIDEBAND_RATE,
    AudioBuffer,
    FirFilter,
    apply_fir,
    downsample_2x,
    resampler_delay,
    upsample_2x,
)
from exceptions import AudioIOError, PreconditionError
from schemas import CodecParams, TargetSourceEnum
from utils import level_dbfs

logger = logging.getLogger(__name__)

FRAME_SIZE = 256
NARROWBAND_FRAME = FRAME_SIZE // 2
T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True, eq=False)
class CorpusFrame:
    index: int
    wideband: np.ndarray  # 256 samples at 16 kHz
    wideband_history: np.ndarray  # previous 256
    narrowband: np.ndarray  # 128 samples at 8 kHz, time-aligned with `wideband`
    narrowband_history: np.ndarray  # previous 128
    level_dbfs: float


@dataclass(frozen=True, eq=False)
class HarmonicRecord:
    """One voiced frame: decoder-side features plus the gains it should synthesize."""
    frame_index: int
    f0_hz: float
    gains_db: np.ndarray
    pitch_gain: float
    features: FeatureVector

    def as_sample(self) -> TrainingSample:
        return TrainingSample(self.features, self.gains_db)


# -------------------------------------------------
# Files
# -------------------------------------------------

def read_manifest(path: Union[str, Path]) -> List[Path]:
    """WAV paths listed one per line; '#' starts a comment; relative paths resolve against the manifest."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise AudioIOError(detail=f"Cannot read manifest {path}: {exc}", extra={"path": str(path)}) from exc
    entries = []
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        entry = Path(line)
        entries.append(entry if entry.is_absolute() else path.parent / entry)
    if not entries:
        raise PreconditionError(detail=f"Manifest {path} lists no files")
    return entries


def load_irs(params: CodecParams) -> Optional[FirFilter]:
    return read_fir_taps(params.irs_fir) if params.irs_fir else None


def load_inverse_irs(params: CodecParams) -> Optional[FirFilter]:
    return read_fir_taps(params.inverse_irs_fir) if params.inverse_irs_fir else None


def load_wideband(path: Union[str, Path]) -> AudioBuffer:
    buf = read_wav(path)
    if buf.sample_rate != WIDEBAND_RATE:
        raise PreconditionError(detail=f"{path} must be sampled at {WIDEBAND_RATE} Hz for training or evaluation")
    return buf


def parallel_map(func: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    """Map in a worker pool; results keep the input order."""
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


# -------------------------------------------------
# Frames
# -------------------------------------------------

def _advance(x: np.ndarray, shift: int) -> np.ndarray:
    out = np.zeros_like(x)
    if shift < x.size:
        out[: x.size - shift] = x[shift:]
    return out


def aligned_narrowband(wideband: AudioBuffer, irs: Optional[FirFilter] = None) -> np.ndarray:
    """Narrowband rendering advanced by the decimator delay so frame i matches wideband frame i."""
    nb = downsample_2x(wideband)
    if irs is not None:
        nb = apply_fir(nb, irs)
    return _advance(nb.samples, resampler_delay() // 2)


def iter_frames(wideband: AudioBuffer, narrowband: np.ndarray) -> Iterator[CorpusFrame]:
    count = -(-len(wideband) // FRAME_SIZE)
    wb = np.zeros((count + 1) * FRAME_SIZE)
    wb[FRAME_SIZE : FRAME_SIZE + len(wideband)] = wideband.samples
    nb = np.zeros((count + 1) * NARROWBAND_FRAME)
    nb[NARROWBAND_FRAME : NARROWBAND_FRAME + narrowband.size] = narrowband
    for i in range(count):
        w0 = (i + 1) * FRAME_SIZE
        n0 = (i + 1) * NARROWBAND_FRAME
        frame = wb[w0 : w0 + FRAME_SIZE]
        yield CorpusFrame(
            index=i,
            wideband=frame,
            wideband_history=wb[w0 - FRAME_SIZE : w0],
            narrowband=nb[n0 : n0 + NARROWBAND_FRAME],
            narrowband_history=nb[n0 - NARROWBAND_FRAME : n0],
            level_dbfs=level_dbfs(frame),
        )


def speech_frames(wideband: AudioBuffer, params: CodecParams) -> Iterator[CorpusFrame]:
    nb = aligned_narrowband(wideband, load_irs(params))
    for frame in iter_frames(wideband, nb):
        if frame.level_dbfs >= params.silence_dbfs:
            yield frame


# -------------------------------------------------
# Training material
# -------------------------------------------------

def envelope_vectors(wideband: AudioBuffer, params: CodecParams) -> np.ndarray:
    rows = [highband_vector(f.wideband, params.preemph) for f in speech_frames(wideband, params)]
    return np.array(rows).reshape(-1, ENVELOPE_DIM)


def harmonic_records(wideband: AudioBuffer, params: CodecParams) -> List[HarmonicRecord]:
    nb = aligned_narrowband(wideband, load_irs(params))
    source = wideband.samples
    if params.target_source == TargetSourceEnum.RECTIFIED:
        upsampled = upsample_2x(AudioBuffer(nb, wideband.sample_rate // 2)).samples
        source = _advance(upsampled, resampler_delay())
    padded = np.zeros(len(wideband) + FRAME_SIZE)
    padded[FRAME_SIZE : FRAME_SIZE + source.size] = source

    records = []
    for frame in iter_frames(wideband, nb):
        if frame.level_dbfs < params.silence_dbfs:
            continue
        pitch = estimate_pitch(
            np.concatenate([frame.narrowband_history, frame.narrowband]), params.pitch_doubling_threshold
        )
        start = frame.index * FRAME_SIZE
        target_frame = padded[start + FRAME_SIZE : start + 2 * FRAME_SIZE]
        if target_frame.size < FRAME_SIZE:
            target_frame = np.pad(target_frame, (0, FRAME_SIZE - target_frame.size))
        amplitudes = extract_targets(
            target_frame,
            pitch,
            history=padded[start : start + FRAME_SIZE],
            rectify=params.target_source == TargetSourceEnum.RECTIFIED,
            voicing_threshold=params.voicing_threshold,
        )
        if amplitudes is None:
            continue
        features = assemble_features(mfcc16(frame.narrowband, params.mfcc_include_c0), pitch)
        records.append(HarmonicRecord(frame.index, pitch.f0, amplitudes.gains_db, pitch.gain, features))
    return records


def _file_records(path: Path, params: CodecParams) -> List[HarmonicRecord]:
    records = harmonic_records(load_wideband(path), params)
    logger.debug("corpus.file", extra={"path": str(path), "voiced_frames": len(records)})
    return records


def _file_vectors(path: Path, params: CodecParams) -> np.ndarray:
    return envelope_vectors(load_wideband(path), params)


def collect_envelope_vectors(paths: Sequence[Path], params: CodecParams) -> np.ndarray:
    parts = parallel_map(functools.partial(_file_vectors, params=params), list(paths), params.workers)
    vectors = np.concatenate(parts) if parts else np.zeros((0, ENVELOPE_DIM))
    logger.info("corpus.envelopes", extra={"files": len(paths), "vectors": int(vectors.shape[0])})
    return vectors


def collect_harmonic_records(paths: Sequence[Path], params: CodecParams) -> List[HarmonicRecord]:
    parts = parallel_map(functools.partial(_file_records, params=params), list(paths), params.workers)
    records = [record for part in parts for record in part]
    logger.info("corpus.harmonics", extra={"files": len(paths), "samples": len(records)})
    return records
