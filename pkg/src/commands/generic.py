from __future__ import annotations

import argparse
import functools
import sys
import time
from logging import Logger, getLogger
from typing import Any, Callable, Dict, Optional

from pydantic import BaseModel

from exceptions import BwxError, InternalError
from schemas import CommandEnvelope

log = getLogger(__name__)

Handler = Callable[[argparse.Namespace, Dict[str, Any]], Any]
HIDDEN_FIELDS = {"per_frame"}


# ---------- Output ----------
def _plain(result: Any) -> Any:
    if isinstance(result, BaseModel):
        return result.model_dump(mode="json")
    return result


def render_human(result: Any) -> str:
    """`key: value` lines for reports; strings pass through unchanged."""
    data = _plain(result)
    if data is None:
        return ""
    if isinstance(data, str):
        return data
    if isinstance(data, dict):
        lines = []
        for key, value in data.items():
            if key in HIDDEN_FIELDS or value in (None, {}, []):
                continue
            if isinstance(value, float):
                value = f"{value:.6g}"
            lines.append(f"{key}: {value}")
        return "\n".join(lines)
    return str(data)


def _emit(name: str, result: Any, as_json: bool) -> None:
    if as_json:
        envelope = CommandEnvelope(command=name, result=_plain(result))
        sys.stdout.write(envelope.model_dump_json() + "\n")
    else:
        text = render_human(result)
        if text:
            sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _fail(name: str, exc: BwxError, as_json: bool) -> int:
    sys.stderr.write(exc.to_line() + "\n")
    if as_json:
        envelope = CommandEnvelope(command=name, success=False, error=exc.to_problem())
        sys.stdout.write(envelope.model_dump_json() + "\n")
    return exc.exit_code


# ---------- Decorator ----------
def command(name: str, *, logger: Optional[Logger] = None) -> Callable[[Handler], Callable[..., int]]:
    """
    Wrap a command handler to:
      - print its result (human text, or the JSON envelope with --json)
      - map BwxError to its exit code and a single stderr line
      - wrap unknown errors via BwxError.from_unexpected
      - log once per failure, one summary line per success
    """
    logger = logger or log

    def decorator(func: Handler) -> Callable[..., int]:
        @functools.wraps(func)
        def wrapper(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
            started = time.perf_counter()
            as_json = bool(getattr(args, "json", False))
            try:
                result = func(args, settings)
            except BwxError as exc:
                dur = (time.perf_counter() - started) * 1000
                logger.warning(
                    f"cli.error:{name}",
                    extra={
                        "command": name,
                        "code": exc.code,
                        "detail": exc.detail,
                        "duration_ms": round(dur, 2),
                    },
                    exc_info=isinstance(exc, InternalError),
                )
                return _fail(name, exc, as_json)
            except Exception as exc:
                dur = (time.perf_counter() - started) * 1000
                logger.exception(
                    f"cli.unexpected:{name}",
                    extra={"command": name, "duration_ms": round(dur, 2)},
                )
                return _fail(name, BwxError.from_unexpected(exc), as_json)

            dur = (time.perf_counter() - started) * 1000
            logger.info(f"cli.done:{name}", extra={"command": name, "duration_ms": round(dur, 2)})
            _emit(name, result, as_json)
            return 0

        return wrapper

    return decorator


# ---------- Shared flags ----------
def common_parser() -> argparse.ArgumentParser:
    """Flags every subcommand accepts."""
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--json", action="store_true", help="print a machine-readable envelope")
    parent.add_argument("--preemph", type=float, default=None, help="pre-emphasis coefficient (default BWX_PREEMPH)")
    parent.add_argument("--irs-fir", dest="irs_fir", default=None,
                        help="send-side IRS tap file (default BWX_IRS_FIR)")
    parent.add_argument("--inverse-irs-fir", dest="inverse_irs_fir", default=None,
                        help="receive-side inverse-IRS tap file (default BWX_INVERSE_IRS_FIR)")
    return parent
