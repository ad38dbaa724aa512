"""Labeled probing datasets for the four tasks, with splits and serialization.

Tasks: ``ast_pair`` (binary, node pairs sharing a syntax unit),
``tagging`` (multi-class leaf syntax roles), ``relation_<graph>`` (binary,
directed graph edges), ``ingraph_<graph>`` (binary, graph membership of a
statement pair). Binary tasks are balanced 1:1 with seeded negative sampling
drawn within the same program.
"""
from __future__ import annotations

import csv
import json
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .align import TokenSpan, TokenizedSource, align_span
from .errors import AlignmentError, InsufficientData
from .semgraph import SemanticGraph
from .syntax import AstTree, SyntaxUnit, TagLabel


@dataclass(frozen=True)
class ProbingExample:
    task: str
    source_id: str
    span_a: TokenSpan
    span_b: TokenSpan | None
    label: int

    def to_record(self) -> dict:
        record = {
            "task": self.task,
            "source_id": self.source_id,
            "a": [self.span_a.start, self.span_a.end],
            "label": self.label,
        }
        if self.span_b is not None:
            record["b"] = [self.span_b.start, self.span_b.end]
        return record

    @classmethod
    def from_record(cls, record: dict) -> "ProbingExample":
        span_b = None
        if "b" in record:
            span_b = TokenSpan(record["b"][0], record["b"][1])
        return cls(
            task=record["task"], source_id=record["source_id"],
            span_a=TokenSpan(record["a"][0], record["a"][1]),
            span_b=span_b, label=int(record["label"]),
        )


@dataclass
class SkipReport:
    """Per-source build anomalies (no positives, no negative pool, ...)."""

    entries: list[tuple[str, str, str, int]] = field(default_factory=list)

    def add(self, source_id: str, task: str, reason: str, count: int = 1) -> None:
        self.entries.append((source_id, task, reason, count))

    def write_csv(self, path: Path | str) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["source_id", "task", "reason", "count"])
            writer.writerows(self.entries)


def _safe_align(byte_range, tok: TokenizedSource, origin=None) -> TokenSpan | None:
    try:
        return align_span(byte_range, tok, origin=origin)
    except AlignmentError:
        return None


def _canonical_pair(a: TokenSpan, b: TokenSpan) -> tuple[TokenSpan, TokenSpan]:
    return (a, b) if (a.start, a.end) <= (b.start, b.end) else (b, a)


def build_ast_pairs(
    tree: AstTree,
    units: Sequence[SyntaxUnit],
    tok: TokenizedSource,
    seed: int = 0,
    negative_ratio: float = 1.0,
    report: SkipReport | None = None,
) -> list[ProbingExample]:
    """Positive pairs share a syntax unit; negatives are seeded-uniform pairs
    of nodes with no unit in common. Pairs are unordered (canonicalized by
    span start)."""
    rng = random.Random(seed)
    membership: dict[int, set[int]] = defaultdict(set)
    for unit in units:
        for node_id in unit.member_nodes:
            membership[node_id].add(unit.unit_id)

    spans: dict[int, TokenSpan] = {}
    for node_id in membership:
        span = _safe_align(tree.node(node_id).byte_range, tok, origin=node_id)
        if span is not None:
            spans[node_id] = span

    positives: set[tuple[tuple[int, int], tuple[int, int]]] = set()
    pos_examples: list[ProbingExample] = []
    for unit in sorted(units, key=lambda u: u.unit_id):
        members = sorted(m for m in unit.member_nodes if m in spans)
        for i, a in enumerate(members):
            for b in members[i + 1:]:
                sa, sb = _canonical_pair(spans[a], spans[b])
                key = ((sa.start, sa.end), (sb.start, sb.end))
                if key in positives or key[0] == key[1]:
                    continue
                positives.add(key)
                pos_examples.append(ProbingExample(
                    "ast_pair", tree.source_id, sa, sb, 1))
    if not pos_examples:
        if report is not None:
            report.add(tree.source_id, "ast_pair", "no_positive_pairs")
        return []

    node_ids = sorted(spans)
    negative_pool: list[tuple[int, int]] = []
    for i, a in enumerate(node_ids):
        for b in node_ids[i + 1:]:
            if membership[a] & membership[b]:
                continue
            sa, sb = _canonical_pair(spans[a], spans[b])
            key = ((sa.start, sa.end), (sb.start, sb.end))
            if key in positives or key[0] == key[1]:
                continue
            negative_pool.append((a, b))
    wanted = int(round(len(pos_examples) * negative_ratio))
    if len(negative_pool) < wanted and report is not None:
        report.add(tree.source_id, "ast_pair", "negative_pool_exhausted",
                   wanted - len(negative_pool))
    sampled = rng.sample(negative_pool, min(wanted, len(negative_pool)))
    neg_examples = []
    seen_neg: set[tuple[tuple[int, int], tuple[int, int]]] = set()
    for a, b in sampled:
        sa, sb = _canonical_pair(spans[a], spans[b])
        key = ((sa.start, sa.end), (sb.start, sb.end))
        if key in seen_neg:
            continue
        seen_neg.add(key)
        neg_examples.append(ProbingExample("ast_pair", tree.source_id, sa, sb, 0))
    return pos_examples + neg_examples


def build_tagging(
    tree: AstTree,
    tags: Sequence[tuple[int, TagLabel]],
    retained_labels: Iterable[str],
    tok: TokenizedSource,
    report: SkipReport | None = None,
) -> list[ProbingExample]:
    """One example per leaf whose label survived rare-label filtering.

    Labels index the sorted retained vocabulary.
    """
    vocabulary = sorted(set(retained_labels))
    index = {name: i for i, name in enumerate(vocabulary)}
    examples: list[ProbingExample] = []
    for leaf_id, label in tags:
        if label.is_other or label.name not in index:
            continue
        span = _safe_align(tree.node(leaf_id).byte_range, tok, origin=leaf_id)
        if span is None:
            if report is not None:
                report.add(tree.source_id, "tagging", "unalignable_leaf")
            continue
        examples.append(ProbingExample(
            "tagging", tree.source_id, span, None, index[label.name]))
    return examples


def _graph_spans(graph: SemanticGraph, tok: TokenizedSource,
                 report: SkipReport | None, task: str) -> dict[int, TokenSpan]:
    spans: dict[int, TokenSpan] = {}
    for node in graph.code_nodes():
        span = _safe_align(node.code_range, tok, origin=node.id)
        if span is None:
            if report is not None:
                report.add(graph.source_id, task, "unalignable_node")
            continue
        if span.end > tok.token_count:
            if report is not None:
                report.add(graph.source_id, task, "span_exceeds_context")
            continue
        spans[node.id] = span
    return spans


def build_relation(
    graph: SemanticGraph,
    tok: TokenizedSource,
    seed: int = 0,
    negative_ratio: float = 1.0,
    report: SkipReport | None = None,
) -> list[ProbingExample]:
    """Directed-edge prediction: positives keep (src, dst) order; negatives
    are node pairs with no edge in either direction."""
    task = f"relation_{graph.kind.lower()}"
    rng = random.Random(seed)
    spans = _graph_spans(graph, tok, report, task)
    edge_pairs = graph.edge_pairs()

    positives = []
    for src, dst, _ in sorted(graph.edges):
        if src in spans and dst in spans and src != dst:
            positives.append(ProbingExample(
                task, graph.source_id, spans[src], spans[dst], 1))
    if not positives:
        if report is not None:
            report.add(graph.source_id, task, "no_positive_pairs")
        return []

    node_ids = sorted(spans)
    pool = [
        (a, b)
        for i, a in enumerate(node_ids) for b in node_ids[i + 1:]
        if (a, b) not in edge_pairs and (b, a) not in edge_pairs
    ]
    wanted = int(round(len(positives) * negative_ratio))
    if len(pool) < wanted and report is not None:
        report.add(graph.source_id, task, "negative_pool_exhausted",
                   wanted - len(pool))
    negatives = [
        ProbingExample(task, graph.source_id, *_canonical_pair(spans[a], spans[b]), 0)
        for a, b in rng.sample(pool, min(wanted, len(pool)))
    ]
    return positives + negatives


def build_ingraph(
    graph: SemanticGraph,
    statement_ranges: Sequence[tuple[int, int]],
    tok: TokenizedSource,
    seed: int = 0,
    report: SkipReport | None = None,
) -> list[ProbingExample]:
    """Membership task: positives pair two statements both inside the graph;
    negatives pair an in-graph statement with one absent from it. Pairs are
    unordered; balanced 1:1 by seeded down-sampling."""
    task = f"ingraph_{graph.kind.lower()}"
    rng = random.Random(seed)
    spans = _graph_spans(graph, tok, report, task)
    in_spans = [spans[i] for i in sorted(spans)]
    in_keys = {(s.start, s.end) for s in in_spans}

    out_spans: list[TokenSpan] = []
    for byte_range in statement_ranges:
        span = _safe_align(byte_range, tok)
        if span is not None and (span.start, span.end) not in in_keys:
            out_spans.append(span)

    pos_pool = [
        _canonical_pair(a, b)
        for i, a in enumerate(in_spans) for b in in_spans[i + 1:]
    ]
    neg_pool = [_canonical_pair(a, b) for a in in_spans for b in out_spans]
    if not pos_pool or not neg_pool:
        if report is not None:
            reason = "no_positive_pairs" if not pos_pool else "no_negative_pairs"
            report.add(graph.source_id, task, reason)
        return []
    n = min(len(pos_pool), len(neg_pool))
    pos = pos_pool if len(pos_pool) == n else rng.sample(pos_pool, n)
    neg = neg_pool if len(neg_pool) == n else rng.sample(neg_pool, n)
    return (
        [ProbingExample(task, graph.source_id, a, b, 1) for a, b in pos]
        + [ProbingExample(task, graph.source_id, a, b, 0) for a, b in neg]
    )


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

@dataclass
class DatasetSplit:
    train: list[ProbingExample]
    validation: list[ProbingExample]
    test: list[ProbingExample]
    seed: int
    label_counts: dict[str, Counter] = field(default_factory=dict)

    def parts(self) -> dict[str, list[ProbingExample]]:
        return {"train": self.train, "validation": self.validation, "test": self.test}


def _balance(examples: list[ProbingExample], rng: random.Random) -> list[ProbingExample]:
    """Down-sample the majority class of a binary task to within 1 of parity."""
    by_label = defaultdict(list)
    for ex in examples:
        by_label[ex.label].append(ex)
    if set(by_label) - {0, 1}:
        return list(examples)  # multi-class tasks are not balanced
    pos, neg = by_label.get(1, []), by_label.get(0, [])
    if not pos or not neg:
        raise InsufficientData("balancing a single-class split empties it")
    n = min(len(pos), len(neg))
    keep_pos = pos if len(pos) == n else rng.sample(pos, n)
    keep_neg = neg if len(neg) == n else rng.sample(neg, n)
    merged = keep_pos + keep_neg
    merged.sort(key=lambda e: (e.source_id, e.span_a.start, e.span_a.end,
                               e.span_b.start if e.span_b else -1, e.label))
    return merged


def split_dataset(
    examples: Sequence[ProbingExample],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> DatasetSplit:
    """Program-level split: no source_id spans two parts; deterministic under
    the seed; binary parts re-balanced 1:1 by down-sampling."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    by_source: dict[str, list[ProbingExample]] = defaultdict(list)
    for ex in examples:
        by_source[ex.source_id].append(ex)
    source_ids = sorted(by_source)
    if len(source_ids) < 3:
        raise InsufficientData(f"need >= 3 programs, got {len(source_ids)}")
    rng = random.Random(seed)
    rng.shuffle(source_ids)
    n = len(source_ids)
    n_train = max(1, round(n * ratios[0]))
    n_val = max(1, round(n * ratios[1]))
    n_train = min(n_train, n - 2)
    train_ids = source_ids[:n_train]
    val_ids = source_ids[n_train:n_train + n_val]
    test_ids = source_ids[n_train + n_val:]

    def collect(ids: list[str]) -> list[ProbingExample]:
        out: list[ProbingExample] = []
        for sid in sorted(ids):
            out.extend(by_source[sid])
        return _balance(out, rng) if out else out

    split = DatasetSplit(
        train=collect(train_ids), validation=collect(val_ids),
        test=collect(test_ids), seed=seed,
    )
    for name, part in split.parts().items():
        split.label_counts[name] = Counter(ex.label for ex in part)
    return split


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def write_examples(examples: Iterable[ProbingExample], path: Path | str) -> None:
    with open(path, "w") as handle:
        for ex in examples:
            handle.write(json.dumps(ex.to_record(), sort_keys=True) + "\n")


def read_examples(path: Path | str) -> list[ProbingExample]:
    examples = []
    with open(path) as handle:
        for line in handle:
            if line.strip():
                examples.append(ProbingExample.from_record(json.loads(line)))
    return examples
