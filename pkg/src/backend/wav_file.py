import logging
import struct
import warnings
from pathlib import Path
from typing import Union

import numpy as np
from scipy.io import wavfile

from dsp.signal import SAMPLE_RATES, AudioBuffer
from exceptions import AudioIOError, FormatError

logger = logging.getLogger(__name__)

PCM16_SCALE = 32768.0
_PCM16_MAX = 32767.0 / PCM16_SCALE


def _check_riff_size(path: Path) -> None:
    # a short data chunk reads back silently, so compare against the RIFF length
    try:
        with path.open("rb") as fh:
            head = fh.read(8)
    except FileNotFoundError as exc:
        raise AudioIOError(detail=f"No such file: {path}", extra={"path": str(path)}) from exc
    except OSError as exc:
        raise AudioIOError(detail=f"Cannot read {path}: {exc}", extra={"path": str(path)}) from exc
    if len(head) < 8 or head[:4] != b"RIFF":
        return
    declared = struct.unpack("<I", head[4:8])[0] + 8
    actual = path.stat().st_size
    if actual < declared:
        raise AudioIOError(
            detail=f"Truncated WAV file {path}: expected {declared} bytes, found {actual}",
            extra={"path": str(path), "expected": declared, "found": actual},
        )


def read_wav(path: Union[str, Path]) -> AudioBuffer:
    """Read a RIFF/WAVE PCM16 mono file at 8 or 16 kHz."""
    path = Path(path)
    _check_riff_size(path)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", wavfile.WavFileWarning)
            rate, data = wavfile.read(str(path))
    except FileNotFoundError as exc:
        raise AudioIOError(detail=f"No such file: {path}", extra={"path": str(path)}) from exc
    except OSError as exc:
        raise AudioIOError(detail=f"Cannot read {path}: {exc}", extra={"path": str(path)}) from exc
    except struct.error as exc:
        raise AudioIOError(detail=f"Truncated WAV file {path}", extra={"path": str(path)}) from exc
    except ValueError as exc:
        message = str(exc)
        if "end of file" in message.lower() or "incomplete" in message.lower():
            raise AudioIOError(detail=f"Truncated WAV file {path}", extra={"path": str(path)}) from exc
        raise FormatError(detail=f"Not a supported WAV file {path}: {message}",
                          extra={"path": str(path)}) from exc

    for warning in caught:
        text = str(warning.message)
        if "prematurely" in text or "incomplete chunk" in text.lower():
            raise AudioIOError(detail=f"Truncated WAV file {path}", extra={"path": str(path)})
        logger.debug("wav.warning", extra={"path": str(path), "warning": text})

    if data.ndim != 1:
        raise FormatError(detail=f"{path} has {data.shape[1]} channels, expected mono",
                          extra={"path": str(path)})
    if data.dtype != np.int16:
        raise FormatError(detail=f"{path} is {data.dtype} audio, expected PCM 16-bit",
                          extra={"path": str(path)})
    if rate not in SAMPLE_RATES:
        raise FormatError(detail=f"{path} is sampled at {rate} Hz, expected 8000 or 16000",
                          extra={"path": str(path)})
    return AudioBuffer(data.astype(np.float64) / PCM16_SCALE, int(rate))


def quantize_pcm16(samples: np.ndarray) -> np.ndarray:
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, _PCM16_MAX)
    return np.round(clipped * PCM16_SCALE).astype(np.int16)


def write_wav(buf: AudioBuffer, path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        wavfile.write(str(path), buf.sample_rate, quantize_pcm16(buf.samples))
    except OSError as exc:
        raise AudioIOError(detail=f"Cannot write {path}: {exc}", extra={"path": str(path)}) from exc
