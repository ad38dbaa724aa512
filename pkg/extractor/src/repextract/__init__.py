"""Representation-store extraction from frozen transformer checkpoints."""

from .errors import ExtractionError, ModelLoadError
from .extract import ExtractionJob, ExtractionResult, extract
from .store import ATTENTION_ROW_SUM_TOL, StoreWriter

__all__ = [
    "ATTENTION_ROW_SUM_TOL",
    "ExtractionError",
    "ExtractionJob",
    "ExtractionResult",
    "ModelLoadError",
    "StoreWriter",
    "extract",
]
