"""
Pydantic models shared by the codec library and the command layer.
- Parameter objects validated once at the edge (environment + CLI flags)
- Machine-readable reports emitted with --json
"""
from __future__ import annotations

from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from exceptions import PreconditionError


class TargetSourceEnum(str, Enum):
    WIDEBAND = "wideband"
    RECTIFIED = "rectified"


def _validated(model_cls, **values):
    try:
        return model_cls(**values)
    except ValidationError as exc:
        raise PreconditionError(
            detail=f"Invalid {model_cls.__name__} parameters",
            errors=exc.errors(include_url=False, include_context=False),
        ) from exc


class CodecParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    preemph: float = Field(default=0.7, ge=0.0, lt=1.0, description="Pre-emphasis coefficient mu")
    pitch_doubling_threshold: float = Field(
        default=0.85, gt=0.0, le=1.0, description="Sub-multiple acceptance ratio rho(T/2)/rho(T)"
    )
    voicing_threshold: float = Field(
        default=0.3, gt=0.0, lt=1.0, description="Pitch gain below which a frame is unvoiced"
    )
    mfcc_include_c0: bool = Field(default=True, description="Use c0..c15 (True) or c1..c16 (False)")
    target_source: TargetSourceEnum = Field(
        default=TargetSourceEnum.WIDEBAND, description="Signal harmonic targets are fitted on"
    )
    irs_fir: Optional[str] = Field(default=None, description="Send-side IRS tap file for the narrowband rendering")
    inverse_irs_fir: Optional[str] = Field(
        default=None, description="Receive-side inverse-IRS tap file applied before decoding"
    )
    silence_dbfs: float = Field(default=-60.0, le=0.0, description="Silence gate for corpus frames")
    workers: int = Field(default=1, ge=1, le=64, description="Worker threads for corpus iteration")

    @classmethod
    def from_settings(cls, settings: Dict[str, Any], **overrides: Any) -> "CodecParams":
        values = {
            "preemph": settings.get("PREEMPH", 0.7),
            "pitch_doubling_threshold": settings.get("PITCH_DOUBLING_THRESHOLD", 0.85),
            "voicing_threshold": settings.get("VOICING_THRESHOLD", 0.3),
            "mfcc_include_c0": settings.get("MFCC_INCLUDE_C0", True),
            "target_source": settings.get("TARGET_SOURCE", "wideband"),
            "irs_fir": settings.get("IRS_FIR") or None,
            "inverse_irs_fir": settings.get("INVERSE_IRS_FIR") or None,
            "silence_dbfs": settings.get("SILENCE_DBFS", -60.0),
            "workers": settings.get("WORKERS", 1),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return _validated(cls, **values)

    @property
    def mfcc_tag(self) -> str:
        return "mfcc-c0" if self.mfcc_include_c0 else "mfcc-c1"


class TrainingParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = Field(default=0, ge=0, description="Seed for every random choice of a trainer")
    bits: int = Field(default=8, ge=0, le=16, description="Codebook size as a power of two")
    epochs: int = Field(default=200, ge=1, description="MLP epochs")
    learning_rate: float = Field(default=1e-3, gt=0.0, description="MLP step size")
    batch_size: int = Field(default=32, ge=1, description="MLP mini-batch size")
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0, description="MLP momentum")

    @classmethod
    def from_settings(cls, settings: Dict[str, Any], **overrides: Any) -> "TrainingParams":
        values = {
            "seed": settings.get("SEED", 0),
            "bits": settings.get("VQ_BITS", 8),
            "epochs": settings.get("MLP_EPOCHS", 200),
            "learning_rate": settings.get("MLP_LEARNING_RATE", 1e-3),
            "batch_size": settings.get("MLP_BATCH_SIZE", 32),
            "momentum": settings.get("MLP_MOMENTUM", 0.9),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return _validated(cls, **values)


# ---------- Reports ----------

class DistortionReport(BaseModel):
    per_frame: List[float] = Field(default_factory=list, description="Spectral distortion per frame, dB")
    mean: float = Field(..., ge=0.0)
    median: float = Field(..., ge=0.0)
    frame_count: int = Field(..., gt=0)
    band_hz: Tuple[float, float] = Field(default=(3000.0, 8000.0))


class HarmonicErrorReport(BaseModel):
    mean_abs_error_db: float = Field(..., ge=0.0)
    constant_median_error_db: float = Field(..., ge=0.0, description="Best constant predictor on the same set")
    frame_count: int = Field(..., gt=0)
    mfcc_tag: str


class SideInfoSummary(BaseModel):
    version: int
    frame_size: int
    sample_rate: int
    codebook_hash: str
    frame_count: int
    duration_s: float
    bit_rate: float
    nominal: bool = Field(default=True, description="Duration derived from the frame count")


class TrainingSummary(BaseModel):
    artifact: str
    seed: int
    sample_count: int
    final_loss: float
    stages: List[float] = Field(default_factory=list, description="Loss after each stage or epoch")
    extra: Dict[str, Any] = Field(default_factory=dict)


class CommandEnvelope(BaseModel):
    command: str
    success: bool = True
    result: Any = None
    error: Optional[Dict[str, Any]] = None
