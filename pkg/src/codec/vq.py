"""
LBG (split-and-refine) codebook training and nearest-neighbour quantization
of the 40-point high-band log envelope.
"""
from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from exceptions import DegenerateInputError, IndexRangeError, PreconditionError

logger = logging.getLogger(__name__)

ENVELOPE_DIM = 40
MAX_BITS = 16
SPLIT_SCALE = 0.01
MAX_LLOYD_ITERATIONS = 100
RELATIVE_IMPROVEMENT = 1e-6
_CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True, eq=False)
class Codebook:
    vectors: np.ndarray  # size x dim, dB

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=np.float64, copy=True)
        if vectors.ndim != 2 or vectors.shape[0] < 1 or vectors.shape[1] < 1:
            raise PreconditionError(detail="Codebook vectors must be a non-empty 2-D array")
        size = vectors.shape[0]
        if size & (size - 1) or size > 1 << MAX_BITS:
            raise PreconditionError(detail=f"Codebook size {size} is not a power of two up to 2^{MAX_BITS}")
        if not np.all(np.isfinite(vectors)):
            raise PreconditionError(detail="Codebook entries must be finite")
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def size(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def bits(self) -> int:
        return self.size.bit_length() - 1

    @property
    def content_hash(self) -> int:
        """64-bit digest of the dimensions and little-endian codewords."""
        digest = hashlib.blake2b(digest_size=8)
        digest.update(struct.pack("<II", self.dim, self.size))
        digest.update(self.vectors.astype("<f8").tobytes())
        return int.from_bytes(digest.digest(), "little")


@dataclass(frozen=True, eq=False)
class LbgResult:
    codebook: Codebook
    distortion: float
    history: Tuple[Tuple[float, ...], ...]  # per split stage, distortion after every Lloyd assignment
    stage_distortions: Tuple[float, ...]  # distortion at the end of each split stage


# -------------------------------------------------
# Nearest neighbour
# -------------------------------------------------

def _nearest(vectors: np.ndarray, data: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Index and squared distance of the closest codeword; ties go to the lowest index."""
    size, dim = vectors.shape
    step = max(1, _CHUNK_ELEMENTS // (size * dim))
    labels = np.empty(data.shape[0], dtype=np.int64)
    dists = np.empty(data.shape[0])
    for start in range(0, data.shape[0], step):
        block = data[start : start + step]
        d2 = ((block[:, None, :] - vectors[None, :, :]) ** 2).sum(axis=2)
        idx = np.argmin(d2, axis=1)
        labels[start : start + step] = idx
        dists[start : start + step] = d2[np.arange(block.shape[0]), idx]
    return labels, dists


def _check_vector(cb: Codebook, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != cb.dim:
        raise PreconditionError(detail=f"Vector has {v.shape[-1]} components, codebook dimension is {cb.dim}")
    if not np.all(np.isfinite(v)):
        raise PreconditionError(detail="Vector to quantize must be finite")
    return v


def quantize(cb: Codebook, v) -> int:
    v = _check_vector(cb, v).reshape(-1)
    return int(np.argmin(((cb.vectors - v) ** 2).sum(axis=1)))


def quantize_many(cb: Codebook, data) -> np.ndarray:
    data = np.atleast_2d(_check_vector(cb, data))
    return _nearest(cb.vectors, data)[0]


def decode_index(cb: Codebook, index: int) -> np.ndarray:
    if not 0 <= int(index) < cb.size:
        raise IndexRangeError(detail=f"Index {index} outside codebook of size {cb.size}")
    return cb.vectors[int(index)].copy()


def mean_distortion(cb: Codebook, data) -> float:
    """Mean squared error per dimension, dB^2."""
    data = np.atleast_2d(_check_vector(cb, data))
    _, dists = _nearest(cb.vectors, data)
    return float(np.mean(dists) / cb.dim)


# -------------------------------------------------
# Training
# -------------------------------------------------

def _reseed_empty(vectors, data, labels, dists, rng) -> None:
    counts = np.bincount(labels, minlength=vectors.shape[0])
    for empty in np.flatnonzero(counts == 0):
        donor = int(np.argmax(counts))
        members = np.flatnonzero(labels == donor)
        spread = ((data[members] - vectors[donor]) ** 2).sum(axis=1)
        if spread.max() > 0.0:
            pick = members[int(np.argmax(spread))]
        else:
            pick = members[int(rng.integers(members.size))]
        vectors[empty] = data[pick]
        labels[pick] = empty
        dists[pick] = 0.0
        counts[donor] -= 1
        counts[empty] += 1


def _lloyd(vectors: np.ndarray, data: np.ndarray, rng, history: List[float]) -> float:
    labels, dists = _nearest(vectors, data)
    current = float(np.mean(dists))
    history.append(current / data.shape[1])
    for _ in range(MAX_LLOYD_ITERATIONS):
        for j in range(vectors.shape[0]):
            members = labels == j
            if members.any():
                vectors[j] = data[members].mean(axis=0)
        _reseed_empty(vectors, data, labels, dists, rng)
        labels, dists = _nearest(vectors, data)
        improved = float(np.mean(dists))
        history.append(improved / data.shape[1])
        if current <= 0.0 or (current - improved) <= RELATIVE_IMPROVEMENT * current:
            current = improved
            break
        current = improved
    return current / data.shape[1]


def lbg_train(training, bits: int, seed: int = 0) -> LbgResult:
    data = np.asarray(training, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] < 1:
        raise PreconditionError(detail="Training data must be an (n, dim) array")
    if not 0 <= bits <= MAX_BITS:
        raise PreconditionError(detail=f"bits must lie in [0, {MAX_BITS}], got {bits}")
    size = 1 << bits
    if data.shape[0] < size:
        raise PreconditionError(
            detail=f"Need at least {size} training vectors for {bits} bits, got {data.shape[0]}"
        )
    if not np.all(np.isfinite(data)):
        raise PreconditionError(detail="Training vectors must be finite")

    rng = np.random.default_rng(seed)
    epsilon = SPLIT_SCALE * data.std(axis=0)
    vectors = data.mean(axis=0, keepdims=True)
    _, dists = _nearest(vectors, data)
    stages = [float(np.mean(dists) / data.shape[1])]
    history: List[Tuple[float, ...]] = [(stages[0],)]

    for stage in range(bits):
        vectors = np.concatenate([vectors + epsilon, vectors - epsilon])
        trace: List[float] = []
        stages.append(_lloyd(vectors, data, rng, trace))
        history.append(tuple(trace))
        logger.info("vq.stage", extra={"size": vectors.shape[0], "distortion": stages[-1], "stage": stage + 1})

    if np.unique(vectors, axis=0).shape[0] != size:
        raise DegenerateInputError(
            detail=f"Training set has too few distinct vectors for a {size}-entry codebook"
        )
    return LbgResult(Codebook(vectors), stages[-1], tuple(history), tuple(stages))
