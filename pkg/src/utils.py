import contextlib
import os
import tempfile
from pathlib import Path
from typing import Iterator, Union

import numpy as np


def env_flag(value: str) -> bool:
    """Interpret an environment string as a boolean.
    Args:
        value: Raw environment value.
    Returns:
        True for "true", "1" or "yes" (case-insensitive).
    """
    return str(value).strip().lower() in ("true", "1", "yes")


def level_dbfs(samples: np.ndarray) -> float:
    """Mean-square level of a block relative to digital full scale.
    Args:
        samples: Real samples in the nominal range [-1, 1].
    Returns:
        10*log10(mean(x^2)); -inf for an empty or all-zero block.
    """
    if samples.size == 0:
        return float("-inf")
    power = float(np.mean(np.square(samples)))
    if power <= 0.0:
        return float("-inf")
    return 10.0 * float(np.log10(power))


@contextlib.contextmanager
def atomic_output(path: Union[str, Path]) -> Iterator[Path]:
    """Yield a temporary sibling path that replaces `path` only on success.

    The temporary file lives in the target directory so the final rename is
    atomic. On any exception the temporary file is removed and `path` is left
    untouched.
    """
    target = Path(path)
    fd, tmp_name = tempfile.mkstemp(
        prefix=f".{target.name}.", suffix=".tmp", dir=str(target.parent or Path("."))
    )
    os.close(fd)
    tmp = Path(tmp_name)
    try:
        yield tmp
        os.replace(tmp, target)
    except BaseException:
        with contextlib.suppress(OSError):
            tmp.unlink()
        raise
