"""encode and decode."""
from __future__ import annotations

import argparse
import logging
from typing import Any, Dict

from backend.codebook_file import load_codebook
from backend.model_file import load_model
from backend.sideinfo_file import read_sideinfo, sideinfo_to_bytes
from backend.wav_file import read_wav, write_wav
from codec.corpus import load_inverse_irs, load_irs
from codec.pipeline import Decoder, encode
from commands.generic import command, common_parser
from dsp.signal import NARROWBAND_RATE, WIDEBAND_RATE
from exceptions import AudioIOError
from schemas import CodecParams
from utils import atomic_output

logger = logging.getLogger(__name__)


def _params(args: argparse.Namespace, settings: Dict[str, Any]) -> CodecParams:
    return CodecParams.from_settings(
        settings, preemph=args.preemph, irs_fir=args.irs_fir, inverse_irs_fir=args.inverse_irs_fir
    )


@command("encode", logger=logger)
def encode_file(args: argparse.Namespace, settings: Dict[str, Any]) -> Dict[str, Any]:
    params = _params(args, settings)
    wideband = read_wav(args.input).require_rate(WIDEBAND_RATE)
    cb = load_codebook(args.codebook)
    narrowband, side = encode(wideband, cb, preemph=params.preemph, irs=load_irs(params))

    # both outputs appear together or not at all
    with atomic_output(args.out_nb) as nb_tmp, atomic_output(args.out_si) as si_tmp:
        write_wav(narrowband, nb_tmp)
        try:
            si_tmp.write_bytes(sideinfo_to_bytes(side))
        except OSError as exc:
            raise AudioIOError(detail=f"Cannot write {args.out_si}: {exc}") from exc
    return {
        "frames": side.frame_count,
        "codebook_hash": f"{side.codebook_hash:016x}",
        "out_nb": args.out_nb,
        "out_si": args.out_si,
    }


@command("decode", logger=logger)
def decode_file(args: argparse.Namespace, settings: Dict[str, Any]) -> Dict[str, Any]:
    params = _params(args, settings)
    narrowband = read_wav(args.input).require_rate(NARROWBAND_RATE)
    side = read_sideinfo(args.in_si)
    cb = load_codebook(args.codebook)
    net = load_model(args.model)
    decoder = Decoder(
        cb,
        net,
        preemph=params.preemph,
        doubling_threshold=params.pitch_doubling_threshold,
        voicing_threshold=params.voicing_threshold,
        irs=load_inverse_irs(params),
    )
    wideband = decoder.decode(narrowband, side)
    with atomic_output(args.out) as tmp:
        write_wav(wideband, tmp)
    return {"samples": len(wideband), "latency_samples": decoder.latency, "out": args.out}


def register(subparsers) -> None:
    parent = common_parser()

    p = subparsers.add_parser("encode", parents=[parent], help="wideband WAV to narrowband WAV plus side info")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--out-nb", dest="out_nb", required=True)
    p.add_argument("--out-si", dest="out_si", required=True)
    p.set_defaults(handler=encode_file)

    p = subparsers.add_parser("decode", parents=[parent], help="narrowband WAV plus side info to wideband WAV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--in-si", dest="in_si", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=decode_file)
