"""resample, dump-spectrum and inspect."""
from __future__ import annotations

import argparse
import io
import logging
from typing import Any, Dict

import numpy as np

from backend.fir_file import read_fir_taps
from backend.sideinfo_file import read_sideinfo
from backend.wav_file import read_wav, write_wav
from codec.evaluation import dump_spectrum
from commands.generic import command, common_parser
from dsp.signal import NARROWBAND_RATE, WIDEBAND_RATE, apply_fir, downsample_2x, upsample_2x
from exceptions import AudioIOError
from schemas import SideInfoSummary
from utils import atomic_output

logger = logging.getLogger(__name__)


def _taps(path):
    return read_fir_taps(path) if path else None


@command("resample", logger=logger)
def resample(args: argparse.Namespace, settings: Dict[str, Any]) -> Dict[str, Any]:
    """16 kHz input is decimated to 8 kHz, 8 kHz input interpolated to 16 kHz.

    --irs-fir shapes the narrowband output after decimation; --inverse-irs-fir
    undoes that shaping before interpolation.
    """
    buf = read_wav(args.input)
    if buf.sample_rate == WIDEBAND_RATE:
        out = downsample_2x(buf)
        irs = _taps(args.irs_fir or settings.get("IRS_FIR"))
        if irs is not None:
            out = apply_fir(out, irs)
    else:
        inverse = _taps(args.inverse_irs_fir or settings.get("INVERSE_IRS_FIR"))
        if inverse is not None:
            buf = apply_fir(buf, inverse)
        out = upsample_2x(buf)
    with atomic_output(args.out) as tmp:
        write_wav(out, tmp)
    return {"input_rate": buf.sample_rate, "output_rate": out.sample_rate, "samples": len(out), "out": args.out}


@command("dump-spectrum", logger=logger)
def spectrum(args: argparse.Namespace, settings: Dict[str, Any]) -> Any:
    buf = read_wav(args.input)
    freqs, db = dump_spectrum(buf, at=args.at, window_ms=args.window_ms, offset_db=args.offset_db)
    table = np.column_stack([freqs, db])
    if args.out is None:
        text = io.StringIO()
        np.savetxt(text, table, delimiter=",", fmt="%.3f", header="hz,db", comments="")
        return {"csv": text.getvalue()} if args.json else text.getvalue()
    try:
        with atomic_output(args.out) as tmp:
            np.savetxt(tmp, table, delimiter=",", fmt="%.6f", header="hz,db", comments="")
    except OSError as exc:
        raise AudioIOError(detail=f"Cannot write {args.out}: {exc}") from exc
    return {"bins": int(freqs.size), "peak_hz": float(freqs[int(np.argmax(db))]), "out": args.out}


@command("inspect", logger=logger)
def inspect_sideinfo(args: argparse.Namespace, settings: Dict[str, Any]) -> SideInfoSummary:
    side = read_sideinfo(args.path)
    summary = SideInfoSummary(
        version=side.version,
        frame_size=side.frame_size,
        sample_rate=side.sample_rate,
        codebook_hash=f"{side.codebook_hash:016x}",
        frame_count=side.frame_count,
        duration_s=side.duration,
        bit_rate=side.bit_rate,
    )
    if args.input:
        nb = read_wav(args.input).require_rate(NARROWBAND_RATE)
        if len(nb):
            summary = summary.model_copy(
                update={"duration_s": nb.duration, "bit_rate": 8.0 * side.frame_count / nb.duration, "nominal": False}
            )
    return summary


def register(subparsers) -> None:
    parent = common_parser()

    p = subparsers.add_parser("resample", parents=[parent], help="convert between 8 and 16 kHz")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=resample)

    p = subparsers.add_parser("dump-spectrum", parents=[parent], help="windowed spectrum as CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default=None, help="CSV path (stdout when omitted)")
    p.add_argument("--at", type=float, default=0.0, help="window start, seconds")
    p.add_argument("--window-ms", dest="window_ms", type=float, default=32.0)
    p.add_argument("--offset-db", dest="offset_db", type=float, default=0.0)
    p.set_defaults(handler=spectrum)

    p = subparsers.add_parser("inspect", parents=[parent], help="summarize a side-info file")
    p.add_argument("path")
    p.add_argument("--in", dest="input", default=None, help="narrowband WAV for the actual duration")
    p.set_defaults(handler=inspect_sideinfo)
