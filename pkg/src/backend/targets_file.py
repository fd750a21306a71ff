from pathlib import Path
from typing import Sequence, Union

import numpy as np

from codec.corpus import HarmonicRecord
from exceptions import AudioIOError
from utils import atomic_output

TARGET_COLUMNS = ("frame_index", "f0_hz", "gain1_db", "gain2_db", "pitch_gain")


def records_to_rows(records: Sequence[HarmonicRecord]) -> np.ndarray:
    rows = [(r.frame_index, r.f0_hz, r.gains_db[0], r.gains_db[1], r.pitch_gain) for r in records]
    return np.array(rows, dtype=np.float64).reshape(-1, len(TARGET_COLUMNS))


def write_targets(records: Sequence[HarmonicRecord], path: Union[str, Path]) -> int:
    """CSV dump of harmonic targets; returns the row count."""
    path = Path(path)
    rows = records_to_rows(records)
    try:
        with atomic_output(path) as tmp:
            np.savetxt(tmp, rows, delimiter=",", fmt=["%d", "%.6f", "%.6f", "%.6f", "%.6f"],
                       header=",".join(TARGET_COLUMNS))
    except OSError as exc:
        raise AudioIOError(detail=f"Cannot write {path}: {exc}", extra={"path": str(path)}) from exc
    return int(rows.shape[0])

