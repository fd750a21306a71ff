"""
Open-loop pitch estimation on narrowband speech by normalized autocorrelation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from exceptions import PreconditionError

PITCH_FRAME = 256
MIN_DELAY = 20
MAX_DELAY = 160
SILENCE_DELAY = 80
SILENCE_ENERGY = 1e-8
DOUBLING_THRESHOLD = 0.85
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PitchInfo:
    delay: float
    gain: float

    def __post_init__(self):
        if not MIN_DELAY <= self.delay <= MAX_DELAY:
            raise PreconditionError(detail=f"Pitch delay {self.delay} outside [{MIN_DELAY}, {MAX_DELAY}]")
        if not 0.0 <= self.gain <= 1.0:
            raise PreconditionError(detail=f"Pitch gain {self.gain} outside [0, 1]")

    @property
    def f0(self) -> float:
        return 8000.0 / self.delay

    @classmethod
    def silent(cls) -> "PitchInfo":
        return cls(float(SILENCE_DELAY), 0.0)


def normalized_correlation(x: np.ndarray) -> np.ndarray:
    """rho(T) for T = MIN_DELAY..MAX_DELAY; index 0 corresponds to MIN_DELAY."""
    rho = np.zeros(MAX_DELAY - MIN_DELAY + 1)
    for i, lag in enumerate(range(MIN_DELAY, MAX_DELAY + 1)):
        head, tail = x[lag:], x[:-lag]
        denom = np.dot(head, head) * np.dot(tail, tail)
        if denom > 0.0:
            rho[i] = np.dot(head, tail) / np.sqrt(denom)
    return rho


def _halve_doubled(rho: np.ndarray, delay: int, threshold: float) -> int:
    """Move to delay/2 while it keeps `threshold` of the current candidate's correlation."""
    while True:
        half = int(round(delay / 2))
        if half < MIN_DELAY or rho[half - MIN_DELAY] < threshold * rho[delay - MIN_DELAY]:
            return delay
        delay = half


def estimate_pitch(frame, doubling_threshold: float = DOUBLING_THRESHOLD) -> PitchInfo:
    """Frame = previous 128 plus current 128 narrowband samples."""
    x = np.asarray(frame, dtype=np.float64)
    if x.size != PITCH_FRAME:
        raise PreconditionError(detail=f"Pitch frame must hold {PITCH_FRAME} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise PreconditionError(detail="Pitch frame must be finite")
    if np.dot(x, x) < SILENCE_ENERGY:
        return PitchInfo.silent()

    rho = normalized_correlation(x)
    # exact multiples of a period tie up to rounding; take the shortest
    best = MIN_DELAY + int(np.flatnonzero(rho >= rho.max() - TIE_TOLERANCE)[0])
    delay = best
    if rho[delay - MIN_DELAY] > 0.0:
        delay = _halve_doubled(rho, delay, doubling_threshold)
    gain = float(np.clip(rho[delay - MIN_DELAY], 0.0, 1.0))
    return PitchInfo(float(delay), gain)
