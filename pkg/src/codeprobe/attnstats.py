"""Per-head attention statistics against semantic graphs.

For each graph node's token span, attention mass from the span's rows is
split between columns of semantically related tokens (neighbors in the
graph, either direction) and all other content tokens; a one-sided paired
t-test per head decides whether the related set receives significantly
more mass.
"""
from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .align import RepresentationStore, TokenizedSource
from .dataset import _safe_align
from .errors import InsufficientSamples
from .semgraph import SemanticGraph

Head = tuple[int, int]  # (layer, head index)


@dataclass(frozen=True)
class HeadSample:
    source_id: str
    node_id: int
    head: Head
    w1_sum: float  # attention mass onto related tokens
    w0_sum: float  # attention mass onto unrelated content tokens


@dataclass(frozen=True)
class HeadTestResult:
    head: Head
    graph_kind: str
    n: int
    mean_diff: float
    t_statistic: float
    p_value: float
    significant: bool


def _node_token_sets(graph: SemanticGraph, tok: TokenizedSource):
    """Token-index set per alignable non-sentinel node."""
    token_sets: dict[int, frozenset[int]] = {}
    for node in graph.code_nodes():
        span = _safe_align(node.code_range, tok)
        if span is not None:
            token_sets[node.id] = frozenset(span.indices())
    return token_sets


def collect_head_samples(
    store: RepresentationStore,
    graph: SemanticGraph,
    tok: TokenizedSource | None = None,
    normalize: bool = False,
) -> list[HeadSample]:
    """Attention-mass contrasts for every (node, head) of one source.

    Rows of the node's tokens are summed; columns are partitioned into the
    related set (tokens of graph neighbors, excluding the span itself) and
    the unrelated set (remaining content tokens). Nodes with no neighbors
    or an empty partition side are skipped. With ``normalize`` the sums
    become per-column-token means, removing the set-size bias.
    """
    tok = tok or store.tokenized(graph.source_id)
    token_sets = _node_token_sets(graph, tok)
    content = set(tok.content_indices())
    layers = store.manifest.layers
    heads = store.manifest.heads

    partitions = []  # (node_id, span rows, related cols, unrelated cols)
    for node_id, span_tokens in sorted(token_sets.items()):
        related: set[int] = set()
        for neighbor in graph.neighbors(node_id):
            related |= set(token_sets.get(neighbor, ()))
        related -= span_tokens
        related &= content
        if not related:
            continue
        unrelated = content - span_tokens - related
        if not unrelated:
            continue
        partitions.append((node_id, sorted(span_tokens & content),
                           sorted(related), sorted(unrelated)))
    if not partitions:
        return []

    samples: list[HeadSample] = []
    for layer in range(1, layers + 1):
        block = store.read_attention_block(graph.source_id, layer)
        for head in range(heads):
            matrix = block[head]
            for node_id, rows, related, unrelated in partitions:
                if not rows:
                    continue
                from_span = matrix[rows, :].sum(axis=0)
                w1 = float(from_span[related].sum())
                w0 = float(from_span[unrelated].sum())
                if normalize:
                    w1 /= len(related)
                    w0 /= len(unrelated)
                samples.append(HeadSample(graph.source_id, node_id,
                                          (layer, head), w1, w0))
    return samples


def paired_t_test(differences: Sequence[float], alpha: float = 0.01,
                  head: Head = (0, 0), graph_kind: str = "") -> HeadTestResult:
    """One-sided paired t-test of H1: mean(difference) > 0."""
    d = np.asarray(differences, dtype=np.float64)
    n = d.size
    if n < 2:
        raise InsufficientSamples(f"paired t-test needs >= 2 samples, got {n}")
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean > 0:
            return HeadTestResult(head, graph_kind, n, mean, np.inf, 0.0, True)
        return HeadTestResult(head, graph_kind, n, mean, -np.inf if mean < 0 else 0.0,
                              1.0, False)
    t = mean / (sd / np.sqrt(n))
    p = float(stats.t.sf(t, df=n - 1))
    return HeadTestResult(head, graph_kind, n, mean, float(t), p, p < alpha)


def test_heads(samples: Iterable[HeadSample], graph_kind: str,
               alpha: float = 0.01, sample_cap: int | None = 10_000,
               seed: int = 0) -> list[HeadTestResult]:
    """Run the paired t-test per head over collected samples.

    ``sample_cap`` bounds the paired samples per head (seeded uniform
    subsample), mirroring corpus-scale caps.
    """
    by_head: dict[Head, list[float]] = {}
    for sample in samples:
        by_head.setdefault(sample.head, []).append(sample.w1_sum - sample.w0_sum)
    results = []
    for head in sorted(by_head):
        diffs = by_head[head]
        if sample_cap is not None and len(diffs) > sample_cap:
            diffs = random.Random(seed).sample(diffs, sample_cap)
        results.append(paired_t_test(diffs, alpha=alpha, head=head,
                                     graph_kind=graph_kind))
    return results


def count_semantic_heads(
    results_by_kind: Mapping[str, Sequence[HeadTestResult]],
) -> dict[str, int]:
    """Significant-head count per graph kind."""
    return {
        kind: sum(1 for r in results if r.significant)
        for kind, results in results_by_kind.items()
    }


def significant_heads(results: Iterable[HeadTestResult]) -> set[Head]:
    return {r.head for r in results if r.significant}


def overlap_ratios(set_a: set[Head], set_b: set[Head]) -> tuple[float | None, float | None]:
    """(|A∩B|/|A|, |A∩B|/|B|); None where a denominator is empty."""
    inter = len(set_a & set_b)
    r_a = inter / len(set_a) if set_a else None
    r_b = inter / len(set_b) if set_b else None
    return r_a, r_b


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def write_heads_csv(results: Sequence[HeadTestResult], path: Path | str) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["layer", "head", "graph", "n", "mean_diff", "t", "p",
                         "significant"])
        for r in sorted(results, key=lambda r: (r.graph_kind, r.head)):
            writer.writerow([r.head[0], r.head[1], r.graph_kind, r.n,
                             f"{r.mean_diff:.6g}", f"{r.t_statistic:.6g}",
                             f"{r.p_value:.6g}", int(r.significant)])


def write_counts_csv(counts_by_store: Mapping[str, Mapping[str, int]],
                     path: Path | str) -> None:
    """Rows = graph kind, columns = store/model name (head-count table shape)."""
    stores = sorted(counts_by_store)
    kinds = sorted({k for counts in counts_by_store.values() for k in counts})
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["graph", *stores])
        for kind in kinds:
            writer.writerow([kind, *(counts_by_store[s].get(kind, 0) for s in stores)])


def write_overlap_csv(rows: Sequence[tuple[str, str, float | None, float | None]],
                      path: Path | str) -> None:
    """Rows: (graph kind, pair label, r_a, r_b); empty denominators print '-'."""
    def fmt(value: float | None) -> str:
        return "-" if value is None else f"{value:.4f}"

    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["graph", "pair", "r_a", "r_b"])
        for kind, pair, r_a, r_b in rows:
            writer.writerow([kind, pair, fmt(r_a), fmt(r_b)])
