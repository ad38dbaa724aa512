"""Control-flow, control-dependency, and data-dependency graphs.

The native builders handle the structured MiniLang subset (statement-level
granularity); externally produced graphs are imported from a two-section
text document. ``merge_redundant_nodes`` applies the subset-of-neighbor
merging used during corpus preprocessing.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ImportDocumentError, UnsupportedConstruct
from .syntax import AstNode, AstTree, ByteRange

GRAPH_KINDS = ("CDG", "DDG", "CFG")

_SIMPLE_STATEMENTS = {
    "declaration", "expression_statement", "return_statement",
    "break_statement", "continue_statement", "ERROR",
}
_COMPOUND_STATEMENTS = {"if_statement", "while_statement", "for_statement",
                        "compound_statement"}


@dataclass(frozen=True)
class SemNode:
    id: int
    code_range: ByteRange
    code_text: str
    kind: str  # "statement" | "predicate" | "entry" | "exit"

    @property
    def is_sentinel(self) -> bool:
        return self.kind in ("entry", "exit")


@dataclass
class SemanticGraph:
    kind: str
    nodes: dict[int, SemNode]
    edges: list[tuple[int, int, str | None]]  # (src, dst, variable or None)
    source_id: str

    ENTRY = 0
    EXIT = 1

    def edge_pairs(self) -> set[tuple[int, int]]:
        return {(src, dst) for src, dst, _ in self.edges}

    def successors(self, node_id: int) -> list[int]:
        return [dst for src, dst, _ in self.edges if src == node_id]

    def predecessors(self, node_id: int) -> list[int]:
        return [src for src, dst, _ in self.edges if dst == node_id]

    def neighbors(self, node_id: int) -> set[int]:
        out: set[int] = set()
        for src, dst, _ in self.edges:
            if src == node_id:
                out.add(dst)
            elif dst == node_id:
                out.add(src)
        return out

    def code_nodes(self) -> list[SemNode]:
        """Nodes carrying source text, sorted by range; sentinels excluded."""
        return sorted(
            (n for n in self.nodes.values() if not n.is_sentinel),
            key=lambda n: (n.code_range, n.id),
        )


# ---------------------------------------------------------------------------
# Statement extraction shared by the three builders
# ---------------------------------------------------------------------------

class _Stmt:
    """One CFG-level unit: a simple statement or a branch/loop predicate."""

    __slots__ = ("node_id", "ast", "kind")

    def __init__(self, node_id: int, ast: AstNode, kind: str):
        self.node_id = node_id
        self.ast = ast
        self.kind = kind


class _Extractor:
    """Walks a MiniLang tree, allocating SemNodes for statements/predicates."""

    def __init__(self, tree: AstTree):
        self.tree = tree
        self.next_id = 2  # 0/1 reserved for entry/exit
        self.sem_nodes: dict[int, SemNode] = {
            SemanticGraph.ENTRY: SemNode(SemanticGraph.ENTRY, (0, 0), "", "entry"),
            SemanticGraph.EXIT: SemNode(SemanticGraph.EXIT, (0, 0), "", "exit"),
        }

    def alloc(self, ast: AstNode, kind: str) -> _Stmt:
        node_id = self.next_id
        self.next_id += 1
        start, end = ast.byte_range
        self.sem_nodes[node_id] = SemNode(
            node_id, ast.byte_range,
            self.tree.source[start:end].decode("utf-8", errors="replace"),
            kind,
        )
        return _Stmt(node_id, ast, "predicate" if kind == "predicate" else ast.kind)

    def body_statements(self) -> list[AstNode]:
        """Top-level statement nodes: the function body if present, else the
        translation unit's own statements."""
        root = self.tree.node(self.tree.root)
        items: list[AstNode] = []
        for child_id in root.children:
            child = self.tree.node(child_id)
            if child.kind == "function_definition":
                body = self.tree.node(child.children[-1])
                items.extend(self._block_items(body))
            else:
                items.append(child)
        return items

    def _block_items(self, block: AstNode) -> list[AstNode]:
        return [
            self.tree.node(c) for c in block.children
            if self.tree.node(c).kind not in ("{", "}")
        ]

    def statement_list(self, ast: AstNode) -> list[AstNode]:
        if ast.kind == "compound_statement":
            return self._block_items(ast)
        return [ast]


def _condition_expr(tree: AstTree, stmt: AstNode) -> AstNode:
    """The parenthesized condition of an if/while statement."""
    if stmt.kind in ("if_statement", "while_statement"):
        return tree.node(stmt.children[1])
    raise UnsupportedConstruct(f"no condition on {stmt.kind}")


def _check_supported(tree: AstTree, ast: AstNode) -> None:
    if ast.kind in _SIMPLE_STATEMENTS or ast.kind in _COMPOUND_STATEMENTS:
        return
    raise UnsupportedConstruct(f"unsupported statement kind: {ast.kind}")


# ---------------------------------------------------------------------------
# CFG
# ---------------------------------------------------------------------------

class _CfgBuilder:
    def __init__(self, tree: AstTree):
        self.tree = tree
        self.ex = _Extractor(tree)
        self.edges: set[tuple[int, int]] = set()

    def build(self) -> SemanticGraph:
        items = self.ex.body_statements()
        exits = self._sequence(items, {SemanticGraph.ENTRY}, loop_ctx=None)
        for node_id in exits:
            self.edges.add((node_id, SemanticGraph.EXIT))
        graph = SemanticGraph(
            kind="CFG",
            nodes=dict(self.ex.sem_nodes),
            edges=[(s, d, None) for s, d in sorted(self.edges)],
            source_id=self.tree.source_id,
        )
        _prune_unreachable(graph)
        return graph

    def _link(self, sources: set[int], target: int) -> None:
        for src in sources:
            self.edges.add((src, target))

    def _sequence(self, items, incoming: set[int], loop_ctx) -> set[int]:
        # statements after a jump still allocate nodes (keeping ids aligned
        # with the CDG walk) but receive no incoming edges and are pruned
        current = incoming
        for item in items:
            current = self._statement(item, current, loop_ctx)
        return current

    def _statement(self, ast: AstNode, incoming: set[int], loop_ctx) -> set[int]:
        _check_supported(self.tree, ast)
        kind = ast.kind
        if kind == "compound_statement":
            return self._sequence(self.ex.statement_list(ast), incoming, loop_ctx)
        if kind in ("declaration", "expression_statement", "ERROR"):
            stmt = self.ex.alloc(ast, "statement")
            self._link(incoming, stmt.node_id)
            return {stmt.node_id}
        if kind == "return_statement":
            stmt = self.ex.alloc(ast, "statement")
            self._link(incoming, stmt.node_id)
            self.edges.add((stmt.node_id, SemanticGraph.EXIT))
            return set()
        if kind == "break_statement":
            stmt = self.ex.alloc(ast, "statement")
            self._link(incoming, stmt.node_id)
            if loop_ctx is None:
                raise UnsupportedConstruct("break outside loop")
            loop_ctx["breaks"].add(stmt.node_id)
            return set()
        if kind == "continue_statement":
            stmt = self.ex.alloc(ast, "statement")
            self._link(incoming, stmt.node_id)
            if loop_ctx is None:
                raise UnsupportedConstruct("continue outside loop")
            loop_ctx["continues"].add(stmt.node_id)
            return set()
        if kind == "if_statement":
            pred = self.ex.alloc(_condition_expr(self.tree, ast), "predicate")
            self._link(incoming, pred.node_id)
            then_ast, else_ast = _if_arms(self.tree, ast)
            outs = self._sequence(self.ex.statement_list(then_ast),
                                  {pred.node_id}, loop_ctx)
            if else_ast is not None:
                outs |= self._sequence(self.ex.statement_list(else_ast),
                                       {pred.node_id}, loop_ctx)
            else:
                outs |= {pred.node_id}
            return outs
        if kind == "while_statement":
            pred = self.ex.alloc(_condition_expr(self.tree, ast), "predicate")
            self._link(incoming, pred.node_id)
            ctx = {"breaks": set(), "continues": set()}
            body = self.tree.node(ast.children[2])
            outs = self._sequence(self.ex.statement_list(body), {pred.node_id}, ctx)
            self._link(outs | ctx["continues"], pred.node_id)
            return {pred.node_id} | ctx["breaks"]
        if kind == "for_statement":
            return self._for_statement(ast, incoming)
        raise UnsupportedConstruct(f"unsupported statement kind: {kind}")

    def _for_statement(self, ast: AstNode, incoming: set[int]) -> set[int]:
        init_ast, cond_ast, update_ast, body_ast = _for_parts(self.tree, ast)
        current = incoming
        if init_ast is not None:
            init = self.ex.alloc(init_ast, "statement")
            self._link(current, init.node_id)
            current = {init.node_id}
        pred_ast = cond_ast if cond_ast is not None else self.tree.node(ast.children[0])
        pred = self.ex.alloc(pred_ast, "predicate")
        self._link(current, pred.node_id)
        ctx = {"breaks": set(), "continues": set()}
        body = self.tree.node(body_ast.id)
        outs = self._sequence(self.ex.statement_list(body), {pred.node_id}, ctx)
        back_sources = outs | ctx["continues"]
        if update_ast is not None:
            update = self.ex.alloc(update_ast, "statement")
            self._link(back_sources, update.node_id)
            back_sources = {update.node_id} if back_sources else set()
        self._link(back_sources, pred.node_id)
        exits = set(ctx["breaks"])
        if cond_ast is not None:
            exits.add(pred.node_id)
        return exits


def _if_arms(tree: AstTree, ast: AstNode) -> tuple[AstNode, AstNode | None]:
    kids = [tree.node(c) for c in ast.children]
    then_ast = kids[2]
    else_ast = None
    for i, kid in enumerate(kids):
        if kid.kind == "else":
            else_ast = kids[i + 1]
            break
    return then_ast, else_ast


def _for_parts(tree: AstTree, ast: AstNode):
    """Split a for_statement into (init, condition, update, body) nodes."""
    kids = [tree.node(c) for c in ast.children]
    # layout: for ( <init?> <cond?> ; <update?> ) body
    body = kids[-1]
    inner = kids[2:-2]  # between '(' and ')'
    init_ast = cond_ast = update_ast = None
    idx = 0
    if idx < len(inner) and inner[idx].kind in ("declaration", "expression_statement"):
        init_ast = inner[idx]
        idx += 1
    elif idx < len(inner) and inner[idx].kind == ";":
        idx += 1
    if idx < len(inner) and inner[idx].kind != ";":
        cond_ast = inner[idx]
        idx += 1
    if idx < len(inner) and inner[idx].kind == ";":
        idx += 1
    if idx < len(inner):
        update_ast = inner[idx]
    return init_ast, cond_ast, update_ast, body


def _prune_unreachable(graph: SemanticGraph) -> None:
    """Drop code nodes never linked into the flow (dead code after jumps)."""
    reachable = {SemanticGraph.ENTRY}
    frontier = [SemanticGraph.ENTRY]
    while frontier:
        node = frontier.pop()
        for succ in graph.successors(node):
            if succ not in reachable:
                reachable.add(succ)
                frontier.append(succ)
    reachable.add(SemanticGraph.EXIT)
    graph.nodes = {i: n for i, n in graph.nodes.items() if i in reachable}
    graph.edges = [(s, d, v) for s, d, v in graph.edges
                   if s in reachable and d in reachable]


def build_cfg(tree: AstTree) -> SemanticGraph:
    """Structured control-flow graph over statements and predicates."""
    return _CfgBuilder(tree).build()


# ---------------------------------------------------------------------------
# CDG (structural)
# ---------------------------------------------------------------------------

def build_cdg(tree: AstTree) -> SemanticGraph:
    """Structural control dependence: a statement depends on the predicate of
    the if/loop it sits directly inside; top-level statements depend on entry.

    Node ids match :func:`build_cfg` on the same tree.
    """
    cfg = build_cfg(tree)  # reuse allocation order so ids agree across graphs
    builder = _CfgBuilder(tree)
    items = builder.ex.body_statements()
    edges: list[tuple[int, int, str | None]] = []
    _cdg_walk(builder, items, SemanticGraph.ENTRY, edges)
    node_ids = set(cfg.nodes)
    return SemanticGraph(
        kind="CDG",
        nodes=dict(cfg.nodes),
        edges=sorted((s, d, v) for s, d, v in edges if s in node_ids and d in node_ids),
        source_id=tree.source_id,
    )


def _cdg_walk(builder: _CfgBuilder, items, controller: int, edges) -> None:
    tree = builder.tree
    ex = builder.ex
    for ast in items:
        _check_supported(tree, ast)
        kind = ast.kind
        if kind == "compound_statement":
            _cdg_walk(builder, ex.statement_list(ast), controller, edges)
        elif kind in _SIMPLE_STATEMENTS:
            stmt = ex.alloc(ast, "statement")
            edges.append((controller, stmt.node_id, None))
        elif kind == "if_statement":
            pred = ex.alloc(_condition_expr(tree, ast), "predicate")
            edges.append((controller, pred.node_id, None))
            then_ast, else_ast = _if_arms(tree, ast)
            _cdg_walk(builder, ex.statement_list(then_ast), pred.node_id, edges)
            if else_ast is not None:
                _cdg_walk(builder, ex.statement_list(else_ast), pred.node_id, edges)
        elif kind == "while_statement":
            pred = ex.alloc(_condition_expr(tree, ast), "predicate")
            edges.append((controller, pred.node_id, None))
            body = tree.node(ast.children[2])
            _cdg_walk(builder, ex.statement_list(body), pred.node_id, edges)
        elif kind == "for_statement":
            init_ast, cond_ast, update_ast, body_ast = _for_parts(tree, ast)
            if init_ast is not None:
                init = ex.alloc(init_ast, "statement")
                edges.append((controller, init.node_id, None))
            pred_ast = cond_ast if cond_ast is not None else tree.node(ast.children[0])
            pred = ex.alloc(pred_ast, "predicate")
            edges.append((controller, pred.node_id, None))
            _cdg_walk(builder, ex.statement_list(body_ast), pred.node_id, edges)
            if update_ast is not None:
                update = ex.alloc(update_ast, "statement")
                edges.append((pred.node_id, update.node_id, None))
        else:
            raise UnsupportedConstruct(f"unsupported statement kind: {kind}")


# ---------------------------------------------------------------------------
# DDG (reaching definitions over the CFG)
# ---------------------------------------------------------------------------

def _subtree(tree: AstTree, node: AstNode):
    stack = [node.id]
    while stack:
        cur = tree.node(stack.pop())
        yield cur
        stack.extend(reversed(cur.children))


def _find_stmt_ast(tree: AstTree, code_range: ByteRange) -> AstNode | None:
    """Outermost AST node with exactly this byte range (pre-order first hit)."""
    for node in tree.walk():
        if node.byte_range == code_range:
            return node
    return None


def defs_and_uses(tree: AstTree, ast: AstNode) -> tuple[set[str], set[str]]:
    """Variables defined and used by one statement/predicate subtree.

    Call arguments and predicate identifiers are uses; assignment and
    declaration targets are definitions; compound assignments and update
    expressions both define and use their target.
    """
    defs: set[str] = set()
    uses: set[str] = set()

    def visit(node: AstNode) -> None:
        if node.kind == "declaration":
            for child_id in node.children:
                child = tree.node(child_id)
                if child.kind == "init_declarator":
                    name = tree.node(child.children[0])
                    defs.add(tree.text(name.id))
                    visit(tree.node(child.children[2]))
                elif child.kind == "identifier":
                    defs.add(tree.text(child.id))
            return
        if node.kind == "assignment_expression":
            target, op, value = (tree.node(c) for c in node.children)
            if target.kind == "identifier":
                defs.add(tree.text(target.id))
                if op.kind != "=":
                    uses.add(tree.text(target.id))
            else:
                visit(target)
            visit(value)
            return
        if node.kind == "update_expression":
            for child_id in node.children:
                child = tree.node(child_id)
                if child.kind == "identifier":
                    name = tree.text(child.id)
                    defs.add(name)
                    uses.add(name)
                else:
                    visit(child)
            return
        if node.kind == "identifier":
            uses.add(tree.text(node.id))
            return
        if node.kind == "call_expression":
            # callee name is not a variable use; arguments are
            visit(tree.node(node.children[1]))
            return
        for child_id in node.children:
            visit(tree.node(child_id))

    visit(ast)
    return defs, uses


def build_ddg(tree: AstTree) -> SemanticGraph:
    """Reaching-definitions data dependence over the native CFG.

    Edge (d, u, x) iff the definition of x at d reaches a use of x at u along
    at least one CFG path with no intervening redefinition. Node ids match
    :func:`build_cfg`.
    """
    cfg = build_cfg(tree)
    du: dict[int, tuple[set[str], set[str]]] = {}
    for node in cfg.nodes.values():
        if node.is_sentinel:
            continue
        ast = _find_stmt_ast(tree, node.code_range)
        du[node.id] = defs_and_uses(tree, ast) if ast is not None else (set(), set())

    # reaching definitions: IN/OUT sets of (node, var) pairs
    in_sets: dict[int, set[tuple[int, str]]] = {i: set() for i in cfg.nodes}
    out_sets: dict[int, set[tuple[int, str]]] = {i: set() for i in cfg.nodes}
    preds: dict[int, list[int]] = {i: [] for i in cfg.nodes}
    succs: dict[int, list[int]] = {i: [] for i in cfg.nodes}
    for src, dst, _ in cfg.edges:
        preds[dst].append(src)
        succs[src].append(dst)

    worklist = list(cfg.nodes)
    while worklist:
        node_id = worklist.pop(0)
        new_in = set()
        for p in preds[node_id]:
            new_in |= out_sets[p]
        gen_defs = du.get(node_id, (set(), set()))[0]
        new_out = {(d, v) for d, v in new_in if v not in gen_defs}
        new_out |= {(node_id, v) for v in gen_defs}
        if new_in != in_sets[node_id] or new_out != out_sets[node_id]:
            in_sets[node_id] = new_in
            out_sets[node_id] = new_out
            worklist.extend(succs[node_id])

    edges: set[tuple[int, int, str]] = set()
    for node_id, (defs, uses) in du.items():
        for def_node, var in in_sets[node_id]:
            if var in uses and def_node != node_id:
                edges.add((def_node, node_id, var))
        # a definition in the same node can also feed its own use only via a
        # loop back-path; that case arrives through in_sets above
    return SemanticGraph(
        kind="DDG",
        nodes=dict(cfg.nodes),
        edges=sorted(edges),
        source_id=tree.source_id,
    )


# ---------------------------------------------------------------------------
# Import / export
# ---------------------------------------------------------------------------

def import_graph(document: str, kind: str, source_len: int | None = None,
                 source: bytes = b"", source_id: str = "<import>") -> SemanticGraph:
    """Load a graph from the two-section NODES/EDGES text format."""
    if kind not in GRAPH_KINDS:
        raise ImportDocumentError(f"unknown graph kind: {kind!r}")
    section = None
    nodes: dict[int, SemNode] = {}
    edges: list[tuple[int, int, str | None]] = []
    for lineno, line in enumerate(document.splitlines(), start=1):
        line = line.strip("\n")
        if not line.strip():
            continue
        if line.strip() in ("NODES", "EDGES"):
            section = line.strip()
            continue
        parts = line.split("\t")
        if section == "NODES":
            if len(parts) not in (3, 4):
                raise ImportDocumentError(f"line {lineno}: bad node row")
            try:
                node_id, start, end = int(parts[0]), int(parts[1]), int(parts[2])
            except ValueError as exc:
                raise ImportDocumentError(f"line {lineno}: {exc}") from exc
            if start > end or start < 0:
                raise ImportDocumentError(f"line {lineno}: invalid range")
            if source_len is not None and end > source_len:
                raise ImportDocumentError(
                    f"line {lineno}: range end {end} exceeds source length {source_len}"
                )
            node_kind = parts[3] if len(parts) == 4 else (
                "entry" if node_id == SemanticGraph.ENTRY and start == end == 0
                else "exit" if node_id == SemanticGraph.EXIT and start == end == 0
                else "statement"
            )
            text = source[start:end].decode("utf-8", errors="replace") if source else ""
            nodes[node_id] = SemNode(node_id, (start, end), text, node_kind)
        elif section == "EDGES":
            if len(parts) not in (3, 4):
                raise ImportDocumentError(f"line {lineno}: bad edge row")
            try:
                src, dst = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise ImportDocumentError(f"line {lineno}: {exc}") from exc
            if parts[2] != kind:
                raise ImportDocumentError(
                    f"line {lineno}: edge kind {parts[2]!r} does not match {kind!r}"
                )
            var = parts[3] if len(parts) == 4 else None
            edges.append((src, dst, var))
        else:
            raise ImportDocumentError(f"line {lineno}: content outside NODES/EDGES")
    for src, dst, _ in edges:
        if src not in nodes or dst not in nodes:
            raise ImportDocumentError(f"edge ({src}, {dst}) references unknown node")
    return SemanticGraph(kind=kind, nodes=nodes, edges=edges, source_id=source_id)


def export_graph(graph: SemanticGraph) -> str:
    """Serialize to the NODES/EDGES text format read by :func:`import_graph`."""
    lines = ["NODES"]
    for node in sorted(graph.nodes.values(), key=lambda n: n.id):
        lines.append(f"{node.id}\t{node.code_range[0]}\t{node.code_range[1]}\t{node.kind}")
    lines.append("EDGES")
    for src, dst, var in graph.edges:
        row = f"{src}\t{dst}\t{graph.kind}"
        if var is not None:
            row += f"\t{var}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def dependency_subgraph(graph: SemanticGraph) -> SemanticGraph:
    """Restrict to nodes participating in at least one edge between code
    nodes. Statements with no dependence (beyond the entry sentinel) fall
    outside the graph, which is what the inGraph membership task needs."""
    code_edges = [
        (src, dst, var) for src, dst, var in graph.edges
        if src in graph.nodes and dst in graph.nodes
        and not graph.nodes[src].is_sentinel and not graph.nodes[dst].is_sentinel
    ]
    keep = {n for src, dst, _ in code_edges for n in (src, dst)}
    return SemanticGraph(
        kind=graph.kind,
        nodes={i: n for i, n in graph.nodes.items() if i in keep},
        edges=code_edges,
        source_id=graph.source_id,
    )


# ---------------------------------------------------------------------------
# Node merging
# ---------------------------------------------------------------------------

def _range_subset(inner: ByteRange, outer: ByteRange) -> bool:
    return outer[0] <= inner[0] and inner[1] <= outer[1]


def merge_redundant_nodes(graph: SemanticGraph) -> SemanticGraph:
    """Merge a node into a neighbor whose code range contains it.

    Runs to a fixed point; processing order is ascending (start, length, id)
    so the result is deterministic. Sentinel entry/exit nodes never merge.
    Duplicate edges and self-loops are dropped.
    """
    nodes = dict(graph.nodes)
    edges = list(dict.fromkeys(graph.edges))

    def order_key(node: SemNode):
        start, end = node.code_range
        return (start, end - start, node.id)

    changed = True
    while changed:
        changed = False
        for node in sorted(nodes.values(), key=order_key):
            if node.is_sentinel:
                continue
            neighbors = set()
            for src, dst, _ in edges:
                if src == node.id:
                    neighbors.add(dst)
                elif dst == node.id:
                    neighbors.add(src)
            candidates = [
                nodes[n] for n in neighbors
                if not nodes[n].is_sentinel
                and nodes[n].id != node.id
                and _range_subset(node.code_range, nodes[n].code_range)
                and nodes[n].code_range != node.code_range
            ]
            equal_range = [
                nodes[n] for n in neighbors
                if not nodes[n].is_sentinel
                and nodes[n].code_range == node.code_range
                and nodes[n].id > node.id
            ]
            target: SemNode | None = None
            if candidates:
                target = min(candidates, key=order_key)
            elif equal_range:
                # identical ranges: fold the higher id into the lower
                absorbed = min(equal_range, key=lambda n: n.id)
                edges = _repoint(edges, absorbed.id, node.id)
                del nodes[absorbed.id]
                changed = True
                break
            if target is not None:
                edges = _repoint(edges, node.id, target.id)
                del nodes[node.id]
                changed = True
                break
    return SemanticGraph(kind=graph.kind, nodes=nodes,
                         edges=sorted(dict.fromkeys(edges)),
                         source_id=graph.source_id)


def _repoint(edges, old_id: int, new_id: int):
    out = []
    for src, dst, var in edges:
        src = new_id if src == old_id else src
        dst = new_id if dst == old_id else dst
        if src == dst:
            continue
        out.append((src, dst, var))
    return list(dict.fromkeys(out))
