"""Synthetic corpora and representation stores.

Used to exercise the pipeline without model inference: random MiniLang
programs, random stores, stores with linearly decodable planted span
features, and attention stores with planted semantic heads.
"""
from __future__ import annotations

import random
from pathlib import Path

import numpy as np

from .align import StoreWriter, TokenizedSource, tokenize_source
from .dataset import ProbingExample, _safe_align
from .semgraph import SemanticGraph

_VAR_NAMES = ["a", "b", "c", "d", "e", "g", "h", "k"]
_CALL_NAMES = ["f", "compute", "emit"]


class ProgramGenerator:
    """Seeded random MiniLang programs with bounded size and nesting.

    With ``allow_jumps`` False the output is fully structured (no break,
    continue, or non-final return), the regime where structural and
    post-dominator control dependence coincide.
    """

    def __init__(self, rng: random.Random, max_statements: int = 8,
                 max_depth: int = 2, allow_jumps: bool = False):
        self.rng = rng
        self.max_statements = max_statements
        self.max_depth = max_depth
        self.allow_jumps = allow_jumps
        self.declared: list[str] = []
        self.budget = 0

    def generate(self) -> bytes:
        rng = self.rng
        self.declared = []
        self.budget = rng.randint(3, self.max_statements)
        lines = []
        for _ in range(rng.randint(1, 2)):
            lines.append(self._declaration())
        lines.extend(self._statements(depth=0, in_loop=False))
        if rng.random() < 0.3 and self.declared:
            lines.append(f"return {rng.choice(self.declared)};")
        return ("\n".join(lines) + "\n").encode()

    def _statements(self, depth: int, in_loop: bool) -> list[str]:
        lines = []
        while self.budget > 0:
            self.budget -= 1
            lines.append(self._statement(depth, in_loop))
            if self.rng.random() < 0.25:
                break
        return lines

    def _statement(self, depth: int, in_loop: bool) -> str:
        rng = self.rng
        choices = ["assign", "declare", "call"]
        if depth < self.max_depth and self.budget > 0:
            choices += ["if", "if_else", "while", "for"]
        if self.allow_jumps and in_loop:
            choices += ["break", "continue"]
        kind = rng.choice(choices)
        if kind == "declare" or not self.declared:
            return self._declaration()
        if kind == "assign":
            target = rng.choice(self.declared)
            return f"{target} = {self._expr()};"
        if kind == "call":
            args = ", ".join(rng.sample(self.declared, min(len(self.declared), rng.randint(1, 2))))
            return f"{rng.choice(_CALL_NAMES)}({args});"
        if kind == "break":
            return "break;"
        if kind == "continue":
            return "continue;"
        if kind in ("if", "if_else"):
            condition = self._condition()
            text = f"if ({condition}) {self._block(depth + 1, in_loop)}"
            if kind == "if_else" and self.budget > 0:
                text += f" else {self._block(depth + 1, in_loop)}"
            return text
        if kind == "while":
            condition = self._condition()
            return f"while ({condition}) {self._block(depth + 1, True)}"
        # for
        bound = rng.choice(self.declared + [str(rng.randint(1, 9))])
        var = self._fresh_var()
        self.declared.append(var)
        return (f"for (int {var} = 0; {var} < {bound}; {var} = {var} + 1) "
                f"{self._block(depth + 1, True)}")

    def _block(self, depth: int, in_loop: bool) -> str:
        inner_budget = min(self.budget, self.rng.randint(1, 3))
        outer_budget = self.budget - inner_budget
        self.budget = inner_budget
        body = self._statements(depth, in_loop)
        self.budget = outer_budget
        if not body:
            body = [f"{self.rng.choice(self.declared)} = {self._expr()};"]
        return "{ " + " ".join(body) + " }"

    def _declaration(self) -> str:
        value = self._expr()
        var = self._fresh_var()
        self.declared.append(var)
        return f"int {var} = {value};"

    def _fresh_var(self) -> str:
        for name in _VAR_NAMES:
            if name not in self.declared:
                return name
        return f"v{len(self.declared)}"

    def _expr(self) -> str:
        rng = self.rng
        def atom() -> str:
            if self.declared and rng.random() < 0.7:
                return rng.choice(self.declared)
            return str(rng.randint(0, 9))
        if rng.random() < 0.5:
            return atom()
        op = rng.choice(["+", "-", "*"])
        return f"{atom()} {op} {atom()}"

    def _condition(self) -> str:
        op = self.rng.choice(["<", ">", "<=", ">=", "==", "!="])
        left = self.rng.choice(self.declared)
        right = self.rng.choice(self.declared + [str(self.rng.randint(0, 9))])
        return f"{left} {op} {right}"


def generate_corpus(directory: Path | str, count: int, seed: int = 0,
                    max_statements: int = 8, max_depth: int = 2,
                    allow_jumps: bool = False) -> list[Path]:
    """Write ``count`` random MiniLang files into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    gen = ProgramGenerator(rng, max_statements=max_statements,
                           max_depth=max_depth, allow_jumps=allow_jumps)
    paths = []
    for i in range(count):
        path = directory / f"prog{i:04d}.mini"
        path.write_bytes(gen.generate())
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# Stores
# ---------------------------------------------------------------------------

def _random_attention(rng: np.random.RandomState, heads: int, T: int) -> np.ndarray:
    block = rng.gamma(2.0, 1.0, size=(heads, T, T)).astype(np.float64)
    block /= block.sum(axis=2, keepdims=True)
    return block


def random_store(store_dir: Path | str, tokenized: list[TokenizedSource],
                 layers: int = 2, hidden_dim: int = 16, heads: int = 4,
                 seed: int = 0, model: str = "synthetic-random") -> StoreWriter:
    """Pure-noise store: Gaussian hidden states, random stochastic attention."""
    rng = np.random.RandomState(seed)
    writer = StoreWriter(store_dir, model=model, layers=layers,
                         hidden_dim=hidden_dim, heads=heads)
    for tok in tokenized:
        T = tok.token_count
        hidden = [rng.normal(size=(T, hidden_dim)) for _ in range(layers + 1)]
        attention = [_random_attention(rng, heads, T) for _ in range(layers)]
        writer.add_source(tok, hidden, attention)
    writer.finalize()
    return writer


def store_for_corpus(corpus_dir: Path | str, store_dir: Path | str,
                     layers: int = 2, hidden_dim: int = 16, heads: int = 4,
                     seed: int = 0) -> None:
    """Random store covering every .mini file of a corpus directory."""
    corpus_dir = Path(corpus_dir)
    tokenized = [
        tokenize_source(path.read_bytes(), source_id=path.stem)
        for path in sorted(corpus_dir.glob("*.mini"))
    ]
    random_store(store_dir, tokenized, layers=layers, hidden_dim=hidden_dim,
                 heads=heads, seed=seed)


# ---------------------------------------------------------------------------
# Planted-feature stores for probe sanity checks
# ---------------------------------------------------------------------------

def planted_dataset(
    store_dir: Path | str,
    task: str,
    n_examples: int = 600,
    class_count: int = 2,
    paired: bool = True,
    hidden_dim: int = 16,
    layers: int = 1,
    heads: int = 2,
    seed: int = 0,
    signal: float = 3.0,
) -> list[ProbingExample]:
    """Build a store plus examples whose label is linearly encoded in the
    span token representations (``signal`` 0 gives pure noise).

    Each example owns disjoint spans inside a per-example source row block;
    examples are spread over 30 synthetic sources so program-level splits
    keep all classes everywhere.
    """
    rng = np.random.RandomState(seed)
    directions = rng.normal(size=(class_count, hidden_dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)

    n_sources = 30
    per_source = (n_examples + n_sources - 1) // n_sources
    span_len = 2
    slot = span_len * (2 if paired else 1)
    T = per_source * slot + 2  # plus the two sentinels

    writer = StoreWriter(store_dir, model="synthetic-planted", layers=layers,
                         hidden_dim=hidden_dim, heads=heads)
    examples: list[ProbingExample] = []
    made = 0
    for s in range(n_sources):
        source_id = f"synth{s:03d}"
        tokens = [(0, (0, 0), "<s>")]
        for i in range(T - 2):
            tokens.append((i + 1, (i * 2, i * 2 + 1), "t"))
        tokens.append((T - 1, (2 * (T - 2), 2 * (T - 2)), "</s>"))
        tok = TokenizedSource(source_id=source_id, tokens=tokens, specials=(0, T - 1))

        hidden = [rng.normal(size=(T, hidden_dim)) for _ in range(layers + 1)]
        attention = [_random_attention(rng, heads, T) for _ in range(layers)]
        for i in range(per_source):
            if made >= n_examples:
                break
            label = made % class_count
            start = 1 + i * slot
            span_a = (start, start + span_len)
            span_b = None
            if paired:
                span_b = (start + span_len, start + 2 * span_len)
            for layer_matrix in hidden:
                rows = list(range(span_a[0], span_a[1]))
                if span_b:
                    rows += list(range(span_b[0], span_b[1]))
                layer_matrix[rows] += signal * directions[label]
            from .align import TokenSpan
            examples.append(ProbingExample(
                task=task, source_id=source_id,
                span_a=TokenSpan(*span_a),
                span_b=TokenSpan(*span_b) if span_b else None,
                label=label,
            ))
            made += 1
        writer.add_source(tok, hidden, attention)
    writer.finalize()
    return examples


# ---------------------------------------------------------------------------
# Planted semantic attention heads
# ---------------------------------------------------------------------------

def planted_attention_store(
    store_dir: Path | str,
    sources: list[tuple[TokenizedSource, SemanticGraph]],
    planted_heads: set[tuple[int, int]],
    layers: int = 2,
    heads: int = 4,
    hidden_dim: int = 8,
    seed: int = 0,
    boost: float = 6.0,
    uniform: bool = False,
) -> None:
    """Store whose planted heads put elevated mass on each span's graph
    neighbors; all other heads are uniform. With ``uniform`` everything is
    uniform (the null control)."""
    rng = np.random.RandomState(seed)
    writer = StoreWriter(store_dir, model="synthetic-attention", layers=layers,
                         hidden_dim=hidden_dim, heads=heads)
    for tok, graph in sources:
        T = tok.token_count
        hidden = [rng.normal(size=(T, hidden_dim)) for _ in range(layers + 1)]

        token_sets: dict[int, set[int]] = {}
        for node in graph.code_nodes():
            span = _safe_align(node.code_range, tok)
            if span is not None:
                token_sets[node.id] = set(span.indices())

        attention = []
        for layer in range(1, layers + 1):
            block = np.full((heads, T, T), 1.0 / T)
            if not uniform:
                for head in range(heads):
                    if (layer, head) not in planted_heads:
                        continue
                    matrix = np.full((T, T), 1.0)
                    for node_id, span_tokens in token_sets.items():
                        related: set[int] = set()
                        for neighbor in graph.neighbors(node_id):
                            related |= token_sets.get(neighbor, set())
                        related -= span_tokens
                        if not related:
                            continue
                        for row in span_tokens:
                            matrix[row, sorted(related)] += boost
                    matrix /= matrix.sum(axis=1, keepdims=True)
                    block[head] = matrix
            attention.append(block)
        writer.add_source(tok, hidden, attention)
    writer.finalize()
