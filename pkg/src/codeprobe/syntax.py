"""Typed parse trees, syntax units, and per-token syntax tagging.

Trees come from one of two providers: the embedded MiniLang parser
(:mod:`codeprobe.minilang`) or an imported parse-tree document produced by an
external grammar (one node per line, tab-separated).
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import ImportDocumentError, ParseError

ByteRange = tuple[int, int]

#: Tagging label vocabulary for Java (36 labels).
JAVA_TAG_LABELS: frozenset[str] = frozenset({
    "modifiers", "local_variable_declaration", "variable_declarator",
    "formal_parameters", "array_type", "dimensions", "formal_parameter",
    "block", "object_creation_expression", "argument_list", "field_access",
    "integral_type", "method_invocation", "while_statement",
    "parenthesized_expression", "if_statement", "expression_statement",
    "break_statement", "update_expression", "assignment_expression",
    "identifier", "for_statement", "binary_expression", "return_statement",
    "array_creation_expression", "dimensions_expr", "array_access", "ERROR",
    "unary_expression", "throw_statement", "enhanced_for_statement",
    "ternary_expression", "cast_expression", "generic_type",
    "type_arguments", "array_initializer",
})

#: Tagging label vocabulary for C/C++ (33 labels).
C_TAG_LABELS: frozenset[str] = frozenset({
    "declaration", "array_declarator", "function_definition",
    "parameter_list", "parameter_declaration", "compound_statement",
    "for_statement", "assignment_expression", "binary_expression",
    "update_expression", "subscript_expression", "expression_statement",
    "if_statement", "parenthesized_expression", "return_statement",
    "call_expression", "argument_list", "string_literal",
    "pointer_expression", "init_declarator", "function_declarator",
    "cast_expression", "type_descriptor", "break_statement",
    "comma_expression", "initializer_list", "char_literal",
    "pointer_declarator", "continue_statement", "while_statement",
    "field_expression", "sizeof_expression", "case_statement",
})

#: Fallback label for leaves with no vocabulary ancestor; excluded downstream.
OTHER_LABEL = "OTHER"

_VOCAB_BY_LANGUAGE = {"java": JAVA_TAG_LABELS, "c": C_TAG_LABELS}


def tag_vocabulary(language: str) -> frozenset[str]:
    try:
        return _VOCAB_BY_LANGUAGE[language.lower()]
    except KeyError:
        raise ValueError(f"unknown language: {language!r}") from None


@dataclass(frozen=True)
class TagLabel:
    """One syntax-tagging label drawn from a language's fixed vocabulary."""

    name: str
    language: str

    def __post_init__(self) -> None:
        if self.name != OTHER_LABEL and self.name not in tag_vocabulary(self.language):
            raise ValueError(f"{self.name!r} not in the {self.language} tag vocabulary")

    @property
    def is_other(self) -> bool:
        return self.name == OTHER_LABEL


@dataclass(frozen=True)
class AstNode:
    id: int
    kind: str
    byte_range: ByteRange
    children: tuple[int, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class AstTree:
    """A typed parse tree over one source unit, addressed by byte offsets."""

    root: int
    nodes: dict[int, AstNode]
    source_id: str
    source: bytes = b""
    _parents: dict[int, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self._parents = {
            child: node.id for node in self.nodes.values() for child in node.children
        }

    def node(self, node_id: int) -> AstNode:
        return self.nodes[node_id]

    def parent(self, node_id: int) -> int | None:
        return self._parents.get(node_id)

    def text(self, node_id: int) -> str:
        start, end = self.nodes[node_id].byte_range
        return self.source[start:end].decode("utf-8", errors="replace")

    def leaves(self) -> list[AstNode]:
        return [n for n in self.walk() if n.is_leaf]

    def internal_nodes(self) -> list[AstNode]:
        return [n for n in self.walk() if not n.is_leaf]

    def walk(self) -> Iterable[AstNode]:
        """Pre-order traversal from the root."""
        stack = [self.root]
        while stack:
            node = self.nodes[stack.pop()]
            yield node
            stack.extend(reversed(node.children))

    def ancestors(self, node_id: int) -> Iterable[AstNode]:
        """Proper ancestors, nearest first."""
        current = self._parents.get(node_id)
        while current is not None:
            yield self.nodes[current]
            current = self._parents.get(current)

    def validate(self) -> None:
        """Check the structural invariants; raises ValueError on violation."""
        seen: set[int] = set()
        for node in self.walk():
            if node.id in seen:
                raise ValueError(f"node {node.id} reachable twice")
            seen.add(node.id)
            start, end = node.byte_range
            if start > end:
                raise ValueError(f"node {node.id} has inverted byte range")
            prev_end = None
            for child_id in node.children:
                child = self.nodes[child_id]
                if child.byte_range[0] < start or child.byte_range[1] > end:
                    raise ValueError(
                        f"child {child_id} range {child.byte_range} escapes "
                        f"parent {node.id} range {node.byte_range}"
                    )
                if prev_end is not None and child.byte_range[0] < prev_end:
                    raise ValueError(f"children of {node.id} overlap or are unordered")
                prev_end = child.byte_range[1]
        if seen != set(self.nodes):
            raise ValueError("unreachable nodes present")


@dataclass(frozen=True)
class SyntaxUnit:
    """An internal node together with its direct children."""

    unit_id: int
    root_node: int
    member_nodes: frozenset[int]


def parse_source(
    code: bytes,
    language: str = "c",
    provider: str = "embedded",
    document: str | None = None,
    source_id: str = "<source>",
) -> AstTree:
    """Obtain an :class:`AstTree` for ``code``.

    ``provider`` is ``"embedded"`` (MiniLang recursive-descent parser) or
    ``"import"`` (``document`` holds an external parse-tree listing, one node
    per line: ``id<TAB>parent_id<TAB>kind<TAB>start<TAB>end``).
    """
    code.decode("utf-8")  # precondition: valid UTF-8
    tag_vocabulary(language)  # precondition: known language
    if provider == "embedded":
        from .minilang import parse_minilang

        tree = parse_minilang(code, source_id=source_id)
    elif provider == "import":
        if document is None:
            raise ImportDocumentError("import provider requires a document")
        tree = _import_tree(code, document, source_id)
    else:
        raise ValueError(f"unknown provider: {provider!r}")
    try:
        tree.validate()
    except ValueError as exc:
        if provider == "import":
            raise ImportDocumentError(str(exc)) from exc
        raise ParseError(str(exc)) from exc
    return tree


def _import_tree(code: bytes, document: str, source_id: str) -> AstTree:
    rows: list[tuple[int, int, str, int, int]] = []
    for lineno, line in enumerate(document.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise ImportDocumentError(f"line {lineno}: expected 5 tab-separated fields")
        try:
            rows.append((int(parts[0]), int(parts[1]), parts[2], int(parts[3]), int(parts[4])))
        except ValueError as exc:
            raise ImportDocumentError(f"line {lineno}: {exc}") from exc
    if not rows:
        raise ImportDocumentError("empty parse-tree document")

    ids = [r[0] for r in rows]
    if len(set(ids)) != len(ids):
        raise ImportDocumentError("duplicate node ids")
    roots = [r for r in rows if r[1] == -1]
    if len(roots) != 1:
        raise ImportDocumentError(f"expected exactly one root, found {len(roots)}")
    known = set(ids)
    children: dict[int, list[int]] = {i: [] for i in ids}
    ranges = {r[0]: (r[3], r[4]) for r in rows}
    for node_id, parent_id, _, start, end in rows:
        if start < 0 or end > len(code) or start > end:
            raise ImportDocumentError(f"node {node_id}: range [{start}, {end}) out of bounds")
        if parent_id != -1:
            if parent_id not in known:
                raise ImportDocumentError(f"node {node_id}: unknown parent {parent_id}")
            children[parent_id].append(node_id)
    for parent_id in children:
        children[parent_id].sort(key=lambda c: ranges[c])
    nodes = {
        node_id: AstNode(node_id, kind, (start, end), tuple(children[node_id]))
        for node_id, _, kind, start, end in rows
    }
    return AstTree(root=roots[0][0], nodes=nodes, source_id=source_id, source=code)


def export_tree(tree: AstTree) -> str:
    """Serialize to the parse-tree document format read by the import provider."""
    parent = {c: n.id for n in tree.nodes.values() for c in n.children}
    lines = []
    for node_id in sorted(tree.nodes):
        node = tree.nodes[node_id]
        lines.append(
            f"{node.id}\t{parent.get(node.id, -1)}\t{node.kind}"
            f"\t{node.byte_range[0]}\t{node.byte_range[1]}"
        )
    return "\n".join(lines) + "\n"


def split_syntax_units(tree: AstTree) -> list[SyntaxUnit]:
    """One unit per internal node: the node plus its direct children.

    Ordered by the unit root's byte offset (ties broken by node id).
    """
    internals = sorted(
        tree.internal_nodes(), key=lambda n: (n.byte_range[0], n.byte_range[1], n.id)
    )
    return [
        SyntaxUnit(
            unit_id=i,
            root_node=node.id,
            member_nodes=frozenset((node.id, *node.children)),
        )
        for i, node in enumerate(internals)
    ]


def tag_tokens(tree: AstTree, language: str) -> list[tuple[int, TagLabel]]:
    """Label every leaf with the kind of its nearest vocabulary ancestor.

    Leaves under no vocabulary ancestor get the reserved OTHER label.
    """
    vocab = tag_vocabulary(language)
    language = language.lower()
    tags: list[tuple[int, TagLabel]] = []
    for leaf in tree.leaves():
        name = OTHER_LABEL
        for ancestor in tree.ancestors(leaf.id):
            if ancestor.kind in vocab:
                name = ancestor.kind
                break
        tags.append((leaf.id, TagLabel(name, language)))
    return tags


def filter_rare_labels(
    counts: Mapping[str, int] | Counter, threshold: int = 200
) -> set[str]:
    """Retain labels whose corpus frequency meets the threshold."""
    return {label for label, count in counts.items() if count >= threshold}


def count_tags(tagged: Iterable[Sequence[tuple[int, TagLabel]]]) -> Counter:
    """Histogram of tag names over a corpus, OTHER excluded."""
    counts: Counter = Counter()
    for per_tree in tagged:
        for _, label in per_tree:
            if not label.is_other:
                counts[label.name] += 1
    return counts
