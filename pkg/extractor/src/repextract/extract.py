"""Run a transformer checkpoint over a corpus and dump a representation store.

The model is used frozen, in eval mode, under ``torch.no_grad``; token byte
offsets come from the fast tokenizer's offset mapping. Decoder-only models
store their causal attention rows as produced; encoder-decoder models store
the encoder and decoder stacks concatenated on the layer axis with the
boundary recorded in the manifest.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .errors import ExtractionError, ModelLoadError
from .store import StoreWriter


@dataclass
class ExtractionJob:
    model: str
    corpus: Path | str
    out: Path | str
    max_len: int = 512
    device: str = "cpu"


@dataclass
class ExtractionResult:
    root: Path
    extracted: list[str] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)  # (source_id, reason)


def load_checkpoint(model_id: str, device: str):
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
    except Exception as exc:
        raise ModelLoadError(f"cannot load tokenizer for {model_id}: {exc}") from exc
    if not getattr(tokenizer, "is_fast", False):
        raise ModelLoadError(
            f"{model_id}: a fast tokenizer is required for offset mapping")
    try:
        # attention weights are only materialized by the eager implementation
        model = AutoModel.from_pretrained(model_id, attn_implementation="eager")
    except Exception as exc:
        raise ModelLoadError(f"cannot load model {model_id}: {exc}") from exc
    model.eval()
    model.to(torch.device(device))
    return tokenizer, model


def _model_context(model) -> int | None:
    config = model.config
    for name in ("max_position_embeddings", "n_positions"):
        value = getattr(config, name, None)
        if isinstance(value, int) and value > 0:
            return value
    return None


def _forward(model, input_ids: torch.Tensor):
    """Hidden matrices (L+1), attention tensors (L), encoder boundary or None."""
    kwargs = dict(output_hidden_states=True, output_attentions=True,
                  return_dict=True)
    if getattr(model.config, "is_encoder_decoder", False):
        out = model(input_ids=input_ids, decoder_input_ids=input_ids, **kwargs)
        hidden = list(out.encoder_hidden_states) + list(out.decoder_hidden_states[1:])
        attention = list(out.encoder_attentions) + list(out.decoder_attentions)
        boundary = len(out.encoder_attentions)
    else:
        out = model(input_ids=input_ids, **kwargs)
        hidden = list(out.hidden_states)
        attention = list(out.attentions)
        boundary = None
    hidden = [h[0].cpu().numpy() for h in hidden]
    attention = [a[0].cpu().numpy() for a in attention]
    return hidden, attention, boundary


def extract(job: ExtractionJob) -> ExtractionResult:
    corpus = Path(job.corpus)
    out = Path(job.out)
    if not corpus.is_dir():
        raise ExtractionError(f"corpus directory not found: {corpus}")
    files = sorted(p for p in corpus.iterdir() if p.is_file())
    if not files:
        raise ExtractionError(f"corpus directory is empty: {corpus}")
    if out.exists() and any(out.iterdir()):
        raise ExtractionError(f"output path is not empty: {out}")
    if job.max_len < 1:
        raise ExtractionError(f"max_len must be positive, got {job.max_len}")

    tokenizer, model = load_checkpoint(job.model, job.device)
    context = _model_context(model)
    if context is not None and job.max_len > context:
        raise ExtractionError(
            f"max_len {job.max_len} exceeds model context {context}")

    result = ExtractionResult(root=out)
    writer: StoreWriter | None = None
    device = torch.device(job.device)
    for path in files:
        source_id = path.stem
        text = path.read_text()
        encoding = tokenizer(text, return_offsets_mapping=True,
                             add_special_tokens=True)
        ids = encoding["input_ids"]
        offsets = [tuple(map(int, pair)) for pair in encoding["offset_mapping"]]
        if len(ids) == 0:
            result.skipped.append((source_id, "no tokens"))
            continue
        if len(ids) > job.max_len:
            result.skipped.append(
                (source_id, f"length {len(ids)} exceeds max_len {job.max_len}"))
            continue
        texts = tokenizer.convert_ids_to_tokens(ids)
        input_ids = torch.tensor([ids], dtype=torch.long, device=device)
        with torch.no_grad():
            hidden, attention, boundary = _forward(model, input_ids)
        if writer is None:
            writer = StoreWriter(
                out, model=job.model, layers=len(attention),
                hidden_dim=hidden[0].shape[1], heads=attention[0].shape[0],
                encoder_layers=boundary,
            )
        writer.add_source(source_id, offsets, texts, hidden, attention)
        result.extracted.append(source_id)

    if writer is None:
        raise ExtractionError(
            "no source produced tensors; see skip records: "
            + "; ".join(f"{sid} ({reason})" for sid, reason in result.skipped))
    writer.finalize()
    write_skips(out / "skips.csv", result.skipped)
    return result


def write_skips(path: Path, skipped: list[tuple[str, str]]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["source_id", "reason"])
        writer.writerows(skipped)
