import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from codec.vq import Codebook
from exceptions import AudioIOError, FormatError
from utils import atomic_output

logger = logging.getLogger(__name__)

CODEBOOK_MAGIC = b"BWXVQ1\0\0"
_HEADER = struct.Struct("<8sII")


def codebook_to_bytes(cb: Codebook) -> bytes:
    return _HEADER.pack(CODEBOOK_MAGIC, cb.dim, cb.size) + cb.vectors.astype("<f8").tobytes()


def codebook_from_bytes(data: bytes, path: Union[str, Path] = "<memory>") -> Codebook:
    path = Path(path)
    if len(data) < _HEADER.size:
        raise FormatError(detail=f"{path} is truncated: expected {_HEADER.size} header bytes, found {len(data)}",
                          extra={"path": str(path)})
    magic, dim, size = _HEADER.unpack_from(data)
    if magic != CODEBOOK_MAGIC:
        raise FormatError(detail=f"{path} is not a bwx codebook (bad magic)", extra={"path": str(path)})
    expected = _HEADER.size + 8 * dim * size
    if len(data) != expected:
        raise FormatError(detail=f"{path}: expected {expected} bytes, found {len(data)}",
                          extra={"path": str(path), "dim": dim, "size": size})
    vectors = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(size, dim)
    try:
        return Codebook(vectors.astype(np.float64))
    except Exception as exc:
        raise FormatError(detail=f"{path} holds an invalid codebook: {exc}") from exc


def save_codebook(cb: Codebook, path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        with atomic_output(path) as tmp:
            tmp.write_bytes(codebook_to_bytes(cb))
    except OSError as exc:
        raise AudioIOError(detail=f"Cannot write {path}: {exc}", extra={"path": str(path)}) from exc
    logger.debug("codebook.saved", extra={"path": str(path), "size": cb.size, "hash": f"{cb.content_hash:016x}"})


def load_codebook(path: Union[str, Path]) -> Codebook:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise AudioIOError(detail=f"Cannot read {path}: {exc}", extra={"path": str(path)}) from exc
    return codebook_from_bytes(data, path)
