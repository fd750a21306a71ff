import warnings
from pathlib import Path
from typing import Union

import numpy as np

from dsp.signal import FirFilter
from exceptions import AudioIOError, FormatError


def read_fir_taps(path: Union[str, Path]) -> FirFilter:
    """Text tap file: one decimal tap per line, '#' starts a comment."""
    path = Path(path)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # empty-file warning
            taps = np.loadtxt(path, comments="#", dtype=np.float64, ndmin=1)
    except FileNotFoundError as exc:
        raise AudioIOError(detail=f"No such tap file: {path}", extra={"path": str(path)}) from exc
    except ValueError as exc:
        raise FormatError(detail=f"Malformed tap file {path}: {exc}", extra={"path": str(path)}) from exc
    if taps.ndim != 1 or taps.size == 0:
        raise FormatError(detail=f"Tap file {path} holds no taps", extra={"path": str(path)})
    if not np.all(np.isfinite(taps)):
        raise FormatError(detail=f"Tap file {path} holds non-finite taps", extra={"path": str(path)})
    return FirFilter(taps, f"taps from {path.name}")


def write_fir_taps(filt: FirFilter, path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        np.savetxt(path, filt.taps, fmt="%.17g", header=filt.description or "FIR taps")
    except OSError as exc:
        raise AudioIOError(detail=f"Cannot write {path}: {exc}", extra={"path": str(path)}) from exc
