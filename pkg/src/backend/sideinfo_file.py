import logging
import struct
from pathlib import Path
from typing import Union

from codec.pipeline import FRAME_SIZE, SideInfoStream
from dsp.signal import WIDEBAND_RATE
from exceptions import AudioIOError, FormatError, UnsupportedVersionError
from utils import atomic_output

logger = logging.getLogger(__name__)

SIDEINFO_MAGIC = b"BWXSI1\0\0"
# magic, version; the rest of the header depends on the version
_PREFIX = struct.Struct("<8sH")
# version 1: frame size, sample rate, codebook hash; payload runs to end of file
# version 2: the same plus a u32 frame count, so truncation is detectable
_HEADERS = {
    1: struct.Struct("<8sHHIQ"),
    2: struct.Struct("<8sHHIQI"),
}
LATEST_VERSION = max(_HEADERS)


def sideinfo_to_bytes(side: SideInfoStream) -> bytes:
    header = _HEADERS.get(side.version)
    if header is None:
        raise UnsupportedVersionError(detail=f"Side-info version {side.version} is not supported",
                                      extra={"version": side.version})
    fields = [SIDEINFO_MAGIC, side.version, side.frame_size, side.sample_rate, side.codebook_hash]
    if side.version >= 2:
        fields.append(side.frame_count)
    return header.pack(*fields) + side.indices


def _truncated(path: Path, expected: int, found: int) -> FormatError:
    return FormatError(
        detail=f"{path} is truncated: expected {expected} header bytes, found {found}",
        extra={"path": str(path)},
    )


def sideinfo_from_bytes(data: bytes, path: Union[str, Path] = "<memory>") -> SideInfoStream:
    path = Path(path)
    if len(data) < _PREFIX.size:
        raise _truncated(path, _PREFIX.size, len(data))
    magic, version = _PREFIX.unpack_from(data)
    if magic != SIDEINFO_MAGIC:
        raise FormatError(detail=f"{path} is not a bwx side-info file (bad magic)", extra={"path": str(path)})
    header = _HEADERS.get(version)
    if header is None:
        raise UnsupportedVersionError(detail=f"Side-info version {version} is not supported",
                                      extra={"path": str(path), "version": version})
    if len(data) < header.size:
        raise _truncated(path, header.size, len(data))
    fields = header.unpack_from(data)
    frame_size, rate, digest = fields[2:5]
    if frame_size != FRAME_SIZE or rate != WIDEBAND_RATE:
        raise FormatError(detail=f"{path} declares {frame_size}-sample frames at {rate} Hz, "
                                 f"expected {FRAME_SIZE} at {WIDEBAND_RATE}")
    payload = data[header.size :]
    if version >= 2 and len(payload) != fields[5]:
        raise FormatError(
            detail=f"{path} payload: expected {fields[5]} bytes, found {len(payload)}",
            extra={"path": str(path), "expected": fields[5], "found": len(payload)},
        )
    return SideInfoStream(digest, bytes(payload), version, frame_size, rate)


def write_sideinfo(side: SideInfoStream, path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        with atomic_output(path) as tmp:
            tmp.write_bytes(sideinfo_to_bytes(side))
    except OSError as exc:
        raise AudioIOError(detail=f"Cannot write {path}: {exc}", extra={"path": str(path)}) from exc


def read_sideinfo(path: Union[str, Path]) -> SideInfoStream:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise AudioIOError(detail=f"Cannot read {path}: {exc}", extra={"path": str(path)}) from exc
    return sideinfo_from_bytes(data, path)
