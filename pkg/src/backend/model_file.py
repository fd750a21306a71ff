import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from codec.mlp import LAYER_SIZES, MlpNetwork
from exceptions import AudioIOError, FormatError, UnsupportedVersionError
from utils import atomic_output

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"BWXMLP1\0"
MODEL_VERSION = 1
_F8 = np.dtype("<f8")


class _Reader:
    """Cursor over a byte string that reports truncation as a format error."""

    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.data):
            raise FormatError(
                detail=f"{self.path} is truncated: expected {self.pos + count} bytes, found {len(self.data)}",
                extra={"path": str(self.path)},
            )
        chunk = self.data[self.pos : self.pos + count]
        self.pos += count
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, *shape: int) -> np.ndarray:
        count = int(np.prod(shape))
        return np.frombuffer(self.take(count * _F8.itemsize), dtype=_F8).reshape(shape).astype(np.float64)


def model_to_bytes(net: MlpNetwork) -> bytes:
    tag = net.mfcc_tag.encode("utf-8")
    parts = [
        MODEL_MAGIC,
        struct.pack("<IQ", MODEL_VERSION, len(LAYER_SIZES)),
        struct.pack(f"<{len(LAYER_SIZES)}Q", *LAYER_SIZES),
        struct.pack("<Q", len(tag)),
        tag,
        net.feature_means.astype(_F8).tobytes(),
        net.feature_stds.astype(_F8).tobytes(),
    ]
    for w, b in zip(net.weights, net.biases):
        parts.append(np.ascontiguousarray(w, dtype=_F8).tobytes())
        parts.append(b.astype(_F8).tobytes())
    return b"".join(parts)


def model_from_bytes(data: bytes, path: Union[str, Path] = "<memory>") -> MlpNetwork:
    path = Path(path)
    reader = _Reader(data, path)
    if reader.take(len(MODEL_MAGIC)) != MODEL_MAGIC:
        raise FormatError(detail=f"{path} is not a bwx model file (bad magic)", extra={"path": str(path)})
    version, layers = reader.unpack("<IQ")
    if version != MODEL_VERSION:
        raise UnsupportedVersionError(detail=f"Model file version {version} is not supported",
                                      extra={"path": str(path), "version": version})
    if layers != len(LAYER_SIZES):
        raise FormatError(detail=f"{path} declares {layers} layers, expected {len(LAYER_SIZES)}")
    sizes = reader.unpack(f"<{layers}Q")
    if tuple(sizes) != LAYER_SIZES:
        raise FormatError(detail=f"{path} has layer sizes {list(sizes)}, expected {list(LAYER_SIZES)}")
    (tag_len,) = reader.unpack("<Q")
    try:
        tag = reader.take(tag_len).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(detail=f"{path} has an unreadable configuration tag") from exc

    means = reader.floats(LAYER_SIZES[0])
    stds = reader.floats(LAYER_SIZES[0])
    weights, biases = [], []
    for fan_in, fan_out in zip(LAYER_SIZES[:-1], LAYER_SIZES[1:]):
        weights.append(reader.floats(fan_out, fan_in))
        biases.append(reader.floats(fan_out))
    if reader.pos != len(data):
        raise FormatError(detail=f"{path} has {len(data) - reader.pos} trailing bytes")
    try:
        return MlpNetwork(tuple(weights), tuple(biases), means, stds, tag)
    except Exception as exc:
        raise FormatError(detail=f"{path} holds an invalid network: {exc}") from exc


def save_model(net: MlpNetwork, path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        with atomic_output(path) as tmp:
            tmp.write_bytes(model_to_bytes(net))
    except OSError as exc:
        raise AudioIOError(detail=f"Cannot write {path}: {exc}", extra={"path": str(path)}) from exc
    logger.debug("model.saved", extra={"path": str(path), "tag": net.mfcc_tag})


def load_model(path: Union[str, Path]) -> MlpNetwork:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise AudioIOError(detail=f"Cannot read {path}: {exc}", extra={"path": str(path)}) from exc
    return model_from_bytes(data, path)
