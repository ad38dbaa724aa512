"""Independent reference implementations used only to cross-check builders.

- CFG: enumerate all bounded execution traces straight off the AST and
  collect observed successor pairs.
- CDG: classic post-dominator walk over the built CFG.
- DDG: depth-first enumeration of CFG paths tracking last definitions.
"""
from __future__ import annotations

from codeprobe.semgraph import SemanticGraph, _find_stmt_ast, defs_and_uses
from codeprobe.syntax import AstNode, AstTree

ENTRY = ("entry",)
EXIT = ("exit",)

_SIMPLE = {"declaration", "expression_statement", "ERROR"}


def _top_items(tree: AstTree) -> list[AstNode]:
    items = []
    for child_id in tree.node(tree.root).children:
        child = tree.node(child_id)
        if child.kind == "function_definition":
            body = tree.node(child.children[-1])
            items.extend(_block_items(tree, body))
        else:
            items.append(child)
    return items


def _block_items(tree: AstTree, block: AstNode) -> list[AstNode]:
    return [tree.node(c) for c in block.children
            if tree.node(c).kind not in ("{", "}")]


def _stmt_list(tree: AstTree, node: AstNode) -> list[AstNode]:
    if node.kind == "compound_statement":
        return _block_items(tree, node)
    return [node]


def _for_parts(tree: AstTree, ast: AstNode):
    kids = [tree.node(c) for c in ast.children]
    body = kids[-1]
    inner = kids[2:-2]
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


def trace_successor_oracle(tree: AstTree, loop_bound: int = 2) -> set:
    """Successor pairs observed over every bounded nondeterministic run."""

    def run_seq(items) -> list[tuple[tuple, str | None]]:
        traces = [((), None)]
        for item in items:
            new = set()
            for events, signal in traces:
                if signal is not None:
                    new.add((events, signal))
                    continue
                for ev2, sig2 in run_stmt(item):
                    new.add((events + ev2, sig2))
            traces = list(new)
        return traces

    def run_loop(pred_range, body_items, update_range, after_pred=True):
        out = []

        def rec(events: tuple, remaining: int) -> None:
            out.append((events, None))  # predicate turned false
            if remaining == 0:
                return
            for body_events, signal in run_seq(body_items):
                extended = events + body_events
                if signal == "return":
                    out.append((extended, "return"))
                elif signal == "break":
                    out.append((extended, None))
                else:  # fell through or continue: update, re-test predicate
                    tail = ()
                    if update_range is not None:
                        tail += (update_range,)
                    tail += (pred_range,)
                    rec(extended + tail, remaining - 1)

        rec((pred_range,), loop_bound)
        return out

    def run_stmt(ast: AstNode) -> list[tuple[tuple, str | None]]:
        kind = ast.kind
        r = ast.byte_range
        if kind in _SIMPLE:
            return [((r,), None)]
        if kind == "return_statement":
            return [((r,), "return")]
        if kind == "break_statement":
            return [((r,), "break")]
        if kind == "continue_statement":
            return [((r,), "continue")]
        if kind == "compound_statement":
            return run_seq(_block_items(tree, ast))
        if kind == "if_statement":
            pred = tree.node(ast.children[1]).byte_range
            kids = [tree.node(c) for c in ast.children]
            then_items = _stmt_list(tree, kids[2])
            else_items = None
            for i, kid in enumerate(kids):
                if kid.kind == "else":
                    else_items = _stmt_list(tree, kids[i + 1])
            out = [((pred,) + ev, sig) for ev, sig in run_seq(then_items)]
            if else_items is not None:
                out += [((pred,) + ev, sig) for ev, sig in run_seq(else_items)]
            else:
                out.append(((pred,), None))
            return out
        if kind == "while_statement":
            pred = tree.node(ast.children[1]).byte_range
            body_items = _stmt_list(tree, tree.node(ast.children[2]))
            return run_loop(pred, body_items, None)
        if kind == "for_statement":
            init, cond, update, body = _for_parts(tree, ast)
            body_items = _stmt_list(tree, body)
            pred = (cond or tree.node(ast.children[0])).byte_range
            update_range = update.byte_range if update is not None else None
            loop_traces = run_loop(pred, body_items, update_range)
            prefix = (init.byte_range,) if init is not None else ()
            return [(prefix + ev, sig) for ev, sig in loop_traces]
        raise AssertionError(f"oracle cannot interpret {kind}")

    successors = set()
    for events, signal in run_seq(_top_items(tree)):
        path = (ENTRY,) + events + (EXIT,)
        for a, b in zip(path, path[1:]):
            successors.add((a, b))
    return successors


def cfg_edge_set(cfg: SemanticGraph) -> set:
    """CFG edges keyed by byte range (entry/exit mapped to markers)."""
    def key(node_id: int):
        node = cfg.nodes[node_id]
        if node.kind == "entry":
            return ENTRY
        if node.kind == "exit":
            return EXIT
        return node.code_range

    return {(key(s), key(d)) for s, d, _ in cfg.edges}


# ---------------------------------------------------------------------------
# Post-dominator control dependence
# ---------------------------------------------------------------------------

def postdominator_cdg_oracle(cfg: SemanticGraph) -> set[tuple[int, int]]:
    """Ferrante-Ottenstein control dependence on the built CFG, with the
    conventional augmenting entry->exit edge and self-dependences dropped."""
    nodes = sorted(cfg.nodes)
    edges = {(s, d) for s, d, _ in cfg.edges}
    edges.add((SemanticGraph.ENTRY, SemanticGraph.EXIT))
    succs = {n: sorted({d for s, d in edges if s == n}) for n in nodes}
    preds = {n: sorted({s for s, d in edges if d == n}) for n in nodes}

    exit_id = SemanticGraph.EXIT
    pdom = {n: set(nodes) for n in nodes}
    pdom[exit_id] = {exit_id}
    changed = True
    while changed:
        changed = False
        for n in nodes:
            if n == exit_id:
                continue
            if not succs[n]:
                continue
            new = {n} | set.intersection(*(pdom[s] for s in succs[n]))
            if new != pdom[n]:
                pdom[n] = new
                changed = True

    ipdom: dict[int, int | None] = {exit_id: None}
    for n in nodes:
        if n == exit_id:
            continue
        strict = pdom[n] - {n}
        # the immediate post-dominator is the closest strict pdom: every
        # other strict pdom post-dominates it
        for candidate in strict:
            if all(other in pdom[candidate] for other in strict):
                ipdom[n] = candidate
                break
        else:
            ipdom[n] = None

    deps: set[tuple[int, int]] = set()
    for u, v in edges:
        w = v
        while w is not None and w != ipdom[u]:
            if w != u:
                deps.add((u, w))
            w = ipdom[w]
    return deps


# ---------------------------------------------------------------------------
# Reaching definitions by path enumeration
# ---------------------------------------------------------------------------

def ddg_path_oracle(tree: AstTree, cfg: SemanticGraph) -> set[tuple[int, int, str]]:
    """Def-use edges observed on CFG paths up to length 2 * |nodes|."""
    du: dict[int, tuple[set[str], set[str]]] = {}
    for node in cfg.nodes.values():
        if node.is_sentinel:
            du[node.id] = (set(), set())
            continue
        ast = _find_stmt_ast(tree, node.code_range)
        du[node.id] = defs_and_uses(tree, ast) if ast is not None else (set(), set())

    succs: dict[int, list[int]] = {n: [] for n in cfg.nodes}
    for s, d, _ in cfg.edges:
        succs[s].append(d)

    bound = 2 * len(cfg.nodes)
    edges: set[tuple[int, int, str]] = set()
    seen_states: set[tuple[int, tuple]] = set()

    def dfs(node: int, last_def: dict[str, int], length: int) -> None:
        defs, uses = du[node]
        for var in uses:
            if var in last_def and last_def[var] != node:
                edges.add((last_def[var], node, var))
        new_last = dict(last_def)
        for var in defs:
            new_last[var] = node
        state = (node, tuple(sorted(new_last.items())))
        if state in seen_states or length >= bound:
            return
        seen_states.add(state)
        for succ in succs[node]:
            dfs(succ, new_last, length + 1)

    dfs(SemanticGraph.ENTRY, {}, 0)
    return edges
