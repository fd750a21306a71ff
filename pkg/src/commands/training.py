"""train-vq, train-mlp and extract-targets."""
from __future__ import annotations

import argparse
import logging
from typing import Any, Dict

from backend.codebook_file import save_codebook
from backend.model_file import save_model
from backend.targets_file import write_targets
from codec.corpus import (
    collect_envelope_vectors,
    collect_harmonic_records,
    harmonic_records,
    load_wideband,
    read_manifest,
)
from codec.mlp import train
from codec.vq import lbg_train
from commands.generic import command, common_parser
from exceptions import PreconditionError, UsageError
from schemas import CodecParams, TrainingParams, TrainingSummary

logger = logging.getLogger(__name__)


def _codec_params(args: argparse.Namespace, settings: Dict[str, Any]) -> CodecParams:
    return CodecParams.from_settings(
        settings, preemph=args.preemph, irs_fir=args.irs_fir, workers=getattr(args, "workers", None)
    )


def _training_params(args: argparse.Namespace, settings: Dict[str, Any]) -> TrainingParams:
    return TrainingParams.from_settings(
        settings,
        seed=args.seed,
        bits=getattr(args, "bits", None),
        epochs=getattr(args, "epochs", None),
        learning_rate=getattr(args, "learning_rate", None),
        batch_size=getattr(args, "batch_size", None),
        momentum=getattr(args, "momentum", None),
    )


@command("train-vq", logger=logger)
def train_vq(args: argparse.Namespace, settings: Dict[str, Any]) -> TrainingSummary:
    params = _codec_params(args, settings)
    training = _training_params(args, settings)
    vectors = collect_envelope_vectors(read_manifest(args.manifest), params)
    result = lbg_train(vectors, training.bits, training.seed)
    save_codebook(result.codebook, args.out)
    return TrainingSummary(
        artifact=args.out,
        seed=training.seed,
        sample_count=int(vectors.shape[0]),
        final_loss=result.distortion,
        stages=list(result.stage_distortions),
        extra={"bits": training.bits, "codebook_hash": f"{result.codebook.content_hash:016x}"},
    )


@command("train-mlp", logger=logger)
def train_mlp(args: argparse.Namespace, settings: Dict[str, Any]) -> TrainingSummary:
    params = _codec_params(args, settings)
    training = _training_params(args, settings)
    records = collect_harmonic_records(read_manifest(args.manifest), params)
    if not records:
        raise PreconditionError(detail="Corpus holds no voiced speech frames to train on")
    result = train(
        [r.as_sample() for r in records],
        learning_rate=training.learning_rate,
        epochs=training.epochs,
        seed=training.seed,
        batch_size=training.batch_size,
        momentum=training.momentum,
        mfcc_tag=params.mfcc_tag,
    )
    save_model(result.network, args.out)
    return TrainingSummary(
        artifact=args.out,
        seed=training.seed,
        sample_count=len(records),
        final_loss=result.mse,
        stages=list(result.history),
        extra={"mfcc_tag": params.mfcc_tag, "target_source": params.target_source.value},
    )


@command("extract-targets", logger=logger)
def extract(args: argparse.Namespace, settings: Dict[str, Any]) -> Dict[str, Any]:
    params = _codec_params(args, settings)
    if bool(args.input) == bool(args.manifest):
        raise UsageError(detail="extract-targets needs exactly one of --in or --manifest")
    if args.input:
        records = harmonic_records(load_wideband(args.input), params)
    else:
        records = collect_harmonic_records(read_manifest(args.manifest), params)
    rows = write_targets(records, args.out)
    return {"rows": rows, "target_source": params.target_source.value, "out": args.out}


def register(subparsers) -> None:
    parent = common_parser()
    corpus = argparse.ArgumentParser(add_help=False)
    corpus.add_argument("--workers", type=int, default=None, help="worker threads (default BWX_WORKERS)")
    corpus.add_argument("--seed", type=int, default=None, help="trainer seed (default BWX_SEED)")

    p = subparsers.add_parser("train-vq", parents=[parent, corpus], help="LBG envelope codebook")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bits", type=int, default=None)
    p.set_defaults(handler=train_vq)

    p = subparsers.add_parser("train-mlp", parents=[parent, corpus], help="harmonic gain predictor")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--momentum", type=float, default=None)
    p.set_defaults(handler=train_mlp)

    p = subparsers.add_parser("extract-targets", parents=[parent, corpus], help="dump harmonic targets as CSV")
    p.add_argument("--in", dest="input", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=extract)
