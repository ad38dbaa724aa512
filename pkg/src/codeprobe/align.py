"""Byte-range to model-token alignment, plus the on-disk representation store.

The store holds, per source, one f32 little-endian row-major matrix per
hidden layer (``h<layer>.bin``, T x D) and one attention block per
transformer layer (``a<layer>.bin``, head-major H x T x T), described by a
single JSON manifest with per-file SHA-256 checksums.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AlignmentError, StoreError

ByteRange = tuple[int, int]

ATTENTION_ROW_SUM_TOL = 1e-4


@dataclass(frozen=True)
class TokenSpan:
    """Half-open token-index interval covering one AST/graph node."""

    start: int
    end: int
    origin: int | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid token span [{self.start}, {self.end})")

    def indices(self) -> range:
        return range(self.start, self.end)


@dataclass
class TokenizedSource:
    """A model tokenization of one source, with byte offsets per token."""

    source_id: str
    tokens: list[tuple[int, ByteRange, str]]  # (index, byte_range, text)
    specials: tuple[int, ...] = ()

    @property
    def token_count(self) -> int:
        return len(self.tokens)

    def content_indices(self) -> list[int]:
        return [i for i, _, _ in self.tokens if i not in self.specials]


_TOKEN_RE = re.compile(rb"[A-Za-z_][A-Za-z0-9_]*|\d+(?:\.\d+)?|\S")


def tokenize_source(code: bytes, source_id: str = "<source>",
                    with_specials: bool = True) -> TokenizedSource:
    """Simple word-level tokenizer used for synthetic stores and tests.

    Emits begin/end sentinel tokens with empty byte ranges, mirroring the
    two special tokens real model tokenizers prepend and append.
    """
    tokens: list[tuple[int, ByteRange, str]] = []
    specials: list[int] = []
    index = 0
    if with_specials:
        tokens.append((index, (0, 0), "<s>"))
        specials.append(index)
        index += 1
    for match in _TOKEN_RE.finditer(code):
        tokens.append((index, (match.start(), match.end()),
                       match.group().decode("utf-8", errors="replace")))
        index += 1
    if with_specials:
        tokens.append((index, (len(code), len(code)), "</s>"))
        specials.append(index)
    return TokenizedSource(source_id=source_id, tokens=tokens,
                           specials=tuple(specials))


def align_span(byte_range: ByteRange, tok: TokenizedSource,
               origin: int | None = None) -> TokenSpan:
    """Smallest contiguous token interval whose byte ranges cover the range.

    Tokens straddling either boundary are included. Raises
    :class:`AlignmentError` when the range overlaps no content token.
    """
    start_b, end_b = byte_range
    hit_indices = [
        i for i, (t_start, t_end), _ in tok.tokens
        if i not in tok.specials and t_start < end_b and t_end > start_b
    ]
    if not hit_indices:
        raise AlignmentError(
            f"byte range [{start_b}, {end_b}) covers no content tokens "
            f"in {tok.source_id}"
        )
    return TokenSpan(start=min(hit_indices), end=max(hit_indices) + 1,
                     origin=origin)


# ---------------------------------------------------------------------------
# Representation store
# ---------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def directory_hash(path: Path | str) -> str:
    """Content hash of a whole store directory (for frozen-store checks)."""
    path = Path(path)
    digest = hashlib.sha256()
    for file in sorted(path.rglob("*")):
        if file.is_file():
            digest.update(str(file.relative_to(path)).encode())
            digest.update(_sha256(file).encode())
    return digest.hexdigest()


@dataclass
class StoreManifest:
    model: str
    layers: int          # transformer layer count L; hidden matrices exist for 0..L
    hidden_dim: int
    heads: int
    dtype: str = "f32le"
    sources: dict[str, dict] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "layers": self.layers,
            "hidden_dim": self.hidden_dim,
            "heads": self.heads,
            "dtype": self.dtype,
            "sources": [
                {"source_id": sid, **entry} for sid, entry in sorted(self.sources.items())
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "StoreManifest":
        manifest = cls(
            model=data["model"], layers=int(data["layers"]),
            hidden_dim=int(data["hidden_dim"]), heads=int(data["heads"]),
            dtype=data.get("dtype", "f32le"),
        )
        for entry in data.get("sources", []):
            entry = dict(entry)
            sid = entry.pop("source_id")
            manifest.sources[sid] = entry
        return manifest


class RepresentationStore:
    """Read-only access to per-layer hidden states and attention tensors."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        manifest_path = self.root / "manifest.json"
        if not manifest_path.is_file():
            raise StoreError(f"missing manifest: {manifest_path}")
        try:
            self.manifest = StoreManifest.from_json(json.loads(manifest_path.read_text()))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise StoreError(f"bad manifest: {exc}") from exc
        if self.manifest.dtype != "f32le":
            raise StoreError(f"unsupported dtype: {self.manifest.dtype}")

    # -- lookup -------------------------------------------------------------

    def source_ids(self) -> list[str]:
        return sorted(self.manifest.sources)

    def token_count(self, source_id: str) -> int:
        return int(self._entry(source_id)["T"])

    def tokenized(self, source_id: str) -> TokenizedSource:
        entry = self._entry(source_id)
        tokens = [
            (i, (int(t["start"]), int(t["end"])), t.get("text", ""))
            for i, t in enumerate(entry["tokens"])
        ]
        specials = tuple(
            i for i, (s, e), _ in tokens if s == e
        )
        return TokenizedSource(source_id=source_id, tokens=tokens, specials=specials)

    def _entry(self, source_id: str) -> dict:
        try:
            return self.manifest.sources[source_id]
        except KeyError:
            raise StoreError(f"unknown source: {source_id}") from None

    # -- tensor reads ---------------------------------------------------------

    def _read_file(self, source_id: str, name: str, shape: tuple[int, ...]) -> np.ndarray:
        entry = self._entry(source_id)
        path = self.root / source_id / name
        if not path.is_file():
            raise StoreError(f"missing tensor file: {path}")
        checksum = entry.get("checksums", {}).get(name)
        if checksum is not None and _sha256(path) != checksum:
            raise StoreError(f"checksum mismatch: {path}")
        data = np.fromfile(path, dtype="<f4")
        expected = int(np.prod(shape))
        if data.size != expected:
            raise StoreError(
                f"shape mismatch for {path}: {data.size} values, expected {expected}"
            )
        return data.reshape(shape)

    def read_layer(self, source_id: str, layer: int) -> np.ndarray:
        """Hidden matrix [T x D] at layer 0..L (0 = embedding layer)."""
        if not 0 <= layer <= self.manifest.layers:
            raise StoreError(f"layer {layer} out of range [0, {self.manifest.layers}]")
        T = self.token_count(source_id)
        return self._read_file(source_id, f"h{layer}.bin", (T, self.manifest.hidden_dim))

    def read_attention_block(self, source_id: str, layer: int) -> np.ndarray:
        """Attention tensor [H x T x T] at layer 1..L; row sums validated."""
        if not 1 <= layer <= self.manifest.layers:
            raise StoreError(f"attention layer {layer} out of range [1, {self.manifest.layers}]")
        T = self.token_count(source_id)
        block = self._read_file(source_id, f"a{layer}.bin",
                                (self.manifest.heads, T, T))
        row_sums = block.sum(axis=2)
        if np.abs(row_sums - 1.0).max() > ATTENTION_ROW_SUM_TOL:
            raise StoreError(
                f"attention rows of {source_id} layer {layer} do not sum to 1"
            )
        return block

    def read_attention(self, source_id: str, layer: int, head: int) -> np.ndarray:
        if not 0 <= head < self.manifest.heads:
            raise StoreError(f"head {head} out of range [0, {self.manifest.heads})")
        return self.read_attention_block(source_id, layer)[head]

    def validate(self) -> None:
        """Full pass over all sources and tensors; raises StoreError."""
        for source_id in self.source_ids():
            for layer in range(self.manifest.layers + 1):
                self.read_layer(source_id, layer)
            for layer in range(1, self.manifest.layers + 1):
                self.read_attention_block(source_id, layer)


class StoreWriter:
    """Single-writer construction of a representation store directory."""

    def __init__(self, root: Path | str, model: str, layers: int,
                 hidden_dim: int, heads: int):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest = StoreManifest(model=model, layers=layers,
                                      hidden_dim=hidden_dim, heads=heads)

    def add_source(self, tok: TokenizedSource, hidden: list[np.ndarray],
                   attention: list[np.ndarray]) -> None:
        """``hidden``: L+1 matrices [T x D]; ``attention``: L tensors [H x T x T]."""
        m = self.manifest
        T = tok.token_count
        if len(hidden) != m.layers + 1:
            raise ValueError(f"expected {m.layers + 1} hidden matrices, got {len(hidden)}")
        if len(attention) != m.layers:
            raise ValueError(f"expected {m.layers} attention tensors, got {len(attention)}")
        source_dir = self.root / tok.source_id
        source_dir.mkdir(parents=True, exist_ok=True)
        checksums: dict[str, str] = {}
        for layer, matrix in enumerate(hidden):
            matrix = np.asarray(matrix, dtype="<f4")
            if matrix.shape != (T, m.hidden_dim):
                raise ValueError(f"hidden layer {layer}: shape {matrix.shape}")
            name = f"h{layer}.bin"
            matrix.tofile(source_dir / name)
            checksums[name] = _sha256(source_dir / name)
        for layer, tensor in enumerate(attention, start=1):
            tensor = np.asarray(tensor, dtype="<f4")
            if tensor.shape != (m.heads, T, T):
                raise ValueError(f"attention layer {layer}: shape {tensor.shape}")
            name = f"a{layer}.bin"
            tensor.tofile(source_dir / name)
            checksums[name] = _sha256(source_dir / name)
        m.sources[tok.source_id] = {
            "T": T,
            "tokens": [
                {"start": s, "end": e, "text": text} for _, (s, e), text in tok.tokens
            ],
            "checksums": checksums,
        }

    def finalize(self) -> RepresentationStore:
        (self.root / "manifest.json").write_text(
            json.dumps(self.manifest.to_json(), indent=1, sort_keys=True)
        )
        return RepresentationStore(self.root)
