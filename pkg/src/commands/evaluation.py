"""eval-sd and eval-harm."""
from __future__ import annotations

import argparse
import functools
import logging
from typing import Any, Dict

import numpy as np

from backend.codebook_file import load_codebook
from backend.model_file import load_model
from codec.corpus import collect_harmonic_records, load_wideband, parallel_map, read_manifest
from codec.evaluation import (
    constant_predictor_error,
    distortion_report,
    envelope_distortions,
    harmonic_gain_error,
    predict_gains,
)
from commands.generic import command, common_parser
from exceptions import AudioIOError, PreconditionError
from schemas import CodecParams, DistortionReport, HarmonicErrorReport
from utils import atomic_output

logger = logging.getLogger(__name__)


def _params(args: argparse.Namespace, settings: Dict[str, Any], **overrides: Any) -> CodecParams:
    return CodecParams.from_settings(
        settings, preemph=args.preemph, irs_fir=args.irs_fir, workers=args.workers, **overrides
    )


def _file_distortions(path, cb, params):
    return envelope_distortions(load_wideband(path), cb, params)


@command("eval-sd", logger=logger)
def eval_sd(args: argparse.Namespace, settings: Dict[str, Any]) -> DistortionReport:
    params = _params(args, settings)
    cb = load_codebook(args.codebook)
    paths = read_manifest(args.manifest)
    parts = parallel_map(functools.partial(_file_distortions, cb=cb, params=params), paths, params.workers)
    report = distortion_report([v for part in parts for v in part])
    if args.out:
        try:
            with atomic_output(args.out) as tmp:
                np.savetxt(tmp, np.array(report.per_frame), fmt="%.6f", header="sd_db", comments="")
        except OSError as exc:
            raise AudioIOError(detail=f"Cannot write {args.out}: {exc}") from exc
    return report


@command("eval-harm", logger=logger)
def eval_harm(args: argparse.Namespace, settings: Dict[str, Any]) -> HarmonicErrorReport:
    net = load_model(args.model)
    # features must be computed the way the network was trained
    params = _params(args, settings, mfcc_include_c0=net.mfcc_tag != "mfcc-c1")
    records = collect_harmonic_records(read_manifest(args.manifest), params)
    if not records:
        raise PreconditionError(detail="Corpus holds no voiced speech frames to evaluate")
    targets = np.array([r.gains_db for r in records])
    predicted = predict_gains(net, np.array([r.features.as_array() for r in records]))
    return HarmonicErrorReport(
        mean_abs_error_db=harmonic_gain_error(predicted, targets),
        constant_median_error_db=constant_predictor_error(targets),
        frame_count=len(records),
        mfcc_tag=net.mfcc_tag,
    )


def register(subparsers) -> None:
    parent = common_parser()
    corpus = argparse.ArgumentParser(add_help=False)
    corpus.add_argument("--manifest", required=True, help="evaluation corpus, disjoint from training")
    corpus.add_argument("--workers", type=int, default=None)

    p = subparsers.add_parser("eval-sd", parents=[parent, corpus], help="envelope spectral distortion, 3-8 kHz")
    p.add_argument("--codebook", required=True)
    p.add_argument("--out", default=None, help="per-frame CSV")
    p.set_defaults(handler=eval_sd)

    p = subparsers.add_parser("eval-harm", parents=[parent, corpus], help="harmonic gain error of a model")
    p.add_argument("--model", required=True)
    p.set_defaults(handler=eval_harm)
