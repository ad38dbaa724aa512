"""Writer for the on-disk representation store interchange format.

Layout: one ``manifest.json`` at the root plus, per source, one f32
little-endian row-major hidden matrix per layer (``h<layer>.bin``, T x D,
layers 0..L where 0 is the embedding layer) and one attention tensor per
transformer layer (``a<layer>.bin``, head-major H x T x T, layers 1..L).
The manifest records per-source token byte offsets and per-file SHA-256
checksums.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ExtractionError

ATTENTION_ROW_SUM_TOL = 1e-4


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class StoreWriter:
    """Single-threaded construction of one store directory.

    ``encoder_layers`` marks the encoder/decoder boundary on the layer axis
    for encoder-decoder models; None for single-stack models.
    """

    def __init__(self, root: Path | str, model: str, layers: int,
                 hidden_dim: int, heads: int,
                 encoder_layers: int | None = None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.model = model
        self.layers = layers
        self.hidden_dim = hidden_dim
        self.heads = heads
        self.encoder_layers = encoder_layers
        self.sources: dict[str, dict] = {}

    def add_source(self, source_id: str, offsets: list[tuple[int, int]],
                   texts: list[str], hidden: list[np.ndarray],
                   attention: list[np.ndarray]) -> None:
        """``hidden``: L+1 matrices [T x D]; ``attention``: L tensors [H x T x T]."""
        T = len(offsets)
        if len(texts) != T:
            raise ExtractionError(f"{source_id}: {len(texts)} token texts for {T} offsets")
        if len(hidden) != self.layers + 1:
            raise ExtractionError(
                f"{source_id}: expected {self.layers + 1} hidden matrices, got {len(hidden)}")
        if len(attention) != self.layers:
            raise ExtractionError(
                f"{source_id}: expected {self.layers} attention tensors, got {len(attention)}")
        source_dir = self.root / source_id
        source_dir.mkdir(parents=True, exist_ok=True)
        checksums: dict[str, str] = {}
        for layer, matrix in enumerate(hidden):
            matrix = np.ascontiguousarray(matrix, dtype="<f4")
            if matrix.shape != (T, self.hidden_dim):
                raise ExtractionError(
                    f"{source_id} hidden layer {layer}: shape {matrix.shape}, "
                    f"expected {(T, self.hidden_dim)}")
            name = f"h{layer}.bin"
            matrix.tofile(source_dir / name)
            checksums[name] = sha256_file(source_dir / name)
        for layer, tensor in enumerate(attention, start=1):
            tensor = np.ascontiguousarray(tensor, dtype="<f4")
            if tensor.shape != (self.heads, T, T):
                raise ExtractionError(
                    f"{source_id} attention layer {layer}: shape {tensor.shape}, "
                    f"expected {(self.heads, T, T)}")
            row_error = np.abs(tensor.sum(axis=2) - 1.0).max()
            if row_error > ATTENTION_ROW_SUM_TOL:
                raise ExtractionError(
                    f"{source_id} attention layer {layer}: row sums off by {row_error:g}")
            name = f"a{layer}.bin"
            tensor.tofile(source_dir / name)
            checksums[name] = sha256_file(source_dir / name)
        self.sources[source_id] = {
            "T": T,
            "tokens": [
                {"start": int(s), "end": int(e), "text": text}
                for (s, e), text in zip(offsets, texts)
            ],
            "checksums": checksums,
        }

    def finalize(self) -> Path:
        manifest = {
            "model": self.model,
            "layers": self.layers,
            "hidden_dim": self.hidden_dim,
            "heads": self.heads,
            "dtype": "f32le",
            "sources": [
                {"source_id": sid, **entry}
                for sid, entry in sorted(self.sources.items())
            ],
        }
        if self.encoder_layers is not None:
            manifest["encoder_layers"] = self.encoder_layers
        path = self.root / "manifest.json"
        path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
        return path
