"""Recursive-descent parser for the MiniLang C-like subset.

Covers declarations, assignments, arithmetic/relational/logical expressions,
if/else, while, for, return, break, continue, calls, and blocks. Node kinds
mirror the C grammar names used by the tagging vocabulary (``declaration``,
``binary_expression``, ``call_expression``, ...). Statements that fail to
parse are wrapped in ``ERROR`` nodes when a synchronization point exists.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ParseError
from .syntax import AstNode, AstTree

_TYPE_KEYWORDS = {"int", "long", "float", "double", "char", "boolean", "bool", "void"}
_KEYWORDS = _TYPE_KEYWORDS | {
    "if", "else", "while", "for", "return", "break", "continue", "true", "false",
}
_TWO_CHAR_OPS = {
    "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=",
}
_SINGLE_CHARS = set("+-*/%<>=!(){},;")

_BINARY_LEVELS = (
    ("||",),
    ("&&",),
    ("==", "!="),
    ("<", ">", "<=", ">="),
    ("+", "-"),
    ("*", "/", "%"),
)

_ASSIGN_OPS = {"=", "+=", "-=", "*=", "/=", "%="}


@dataclass(frozen=True)
class _Token:
    kind: str  # "ident" | "number" | "punct"
    text: str
    start: int
    end: int


class _SyntaxFailure(Exception):
    """Internal: statement-level parse failure, recoverable via ERROR nodes."""


def _tokenize(code: bytes) -> list[_Token]:
    text = code.decode("utf-8")
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c == "/" and text[i + 1 : i + 2] == "/":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("ident", text[i:j], i, j))
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            tokens.append(_Token("number", text[i:j], i, j))
            i = j
            continue
        two = text[i : i + 2]
        if two in _TWO_CHAR_OPS:
            tokens.append(_Token("punct", two, i, i + 2))
            i += 2
            continue
        if c in _SINGLE_CHARS:
            tokens.append(_Token("punct", c, i, i + 1))
            i += 1
            continue
        raise ParseError(f"illegal character {c!r} at byte {i}")
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], source: bytes, source_id: str):
        self.tokens = tokens
        self.pos = 0
        self.source = source
        self.source_id = source_id
        self.nodes: dict[int, AstNode] = {}
        self._next_id = 0

    # -- token helpers -----------------------------------------------------

    def _peek(self, offset: int = 0) -> _Token | None:
        idx = self.pos + offset
        return self.tokens[idx] if idx < len(self.tokens) else None

    def _at(self, text: str) -> bool:
        tok = self._peek()
        return tok is not None and tok.text == text

    def _advance(self) -> _Token:
        tok = self._peek()
        if tok is None:
            raise _SyntaxFailure("unexpected end of input")
        self.pos += 1
        return tok

    def _expect(self, text: str) -> _Token:
        tok = self._peek()
        if tok is None or tok.text != text:
            got = tok.text if tok else "end of input"
            raise _SyntaxFailure(f"expected {text!r}, got {got!r}")
        return self._advance()

    # -- node construction -------------------------------------------------

    def _leaf(self, tok: _Token, kind: str | None = None) -> int:
        if kind is None:
            if tok.kind == "number":
                kind = "number_literal"
            elif tok.text in _KEYWORDS or tok.kind == "punct":
                kind = tok.text
            else:
                kind = "identifier"
        node_id = self._next_id
        self._next_id += 1
        self.nodes[node_id] = AstNode(node_id, kind, (tok.start, tok.end))
        return node_id

    def _node(self, kind: str, children: list[int]) -> int:
        if not children:
            raise _SyntaxFailure(f"internal {kind} node with no children")
        start = self.nodes[children[0]].byte_range[0]
        end = self.nodes[children[-1]].byte_range[1]
        node_id = self._next_id
        self._next_id += 1
        self.nodes[node_id] = AstNode(node_id, kind, (start, end), tuple(children))
        return node_id

    # -- grammar -----------------------------------------------------------

    def parse(self) -> AstTree:
        children: list[int] = []
        while self._peek() is not None:
            children.append(self._top_level())
        if children:
            root = self._node("translation_unit", children)
        else:
            root = self._next_id
            self.nodes[root] = AstNode(root, "translation_unit", (0, 0))
        return AstTree(root=root, nodes=self.nodes, source_id=self.source_id,
                       source=self.source)

    def _top_level(self) -> int:
        tok = self._peek()
        after = self._peek(1)
        two_after = self._peek(2)
        if (
            tok is not None and tok.text in _TYPE_KEYWORDS
            and after is not None and after.kind == "ident"
            and two_after is not None and two_after.text == "("
        ):
            return self._function_definition()
        return self._statement()

    def _function_definition(self) -> int:
        mark = self.pos
        try:
            type_leaf = self._leaf(self._advance(), "primitive_type")
            name = self._leaf(self._advance())
            params = self._parameter_list()
            declarator = self._node("function_declarator", [name, params])
            body = self._compound_statement()
            return self._node("function_definition", [type_leaf, declarator, body])
        except _SyntaxFailure:
            self.pos = mark
            return self._recover()

    def _parameter_list(self) -> int:
        children = [self._leaf(self._expect("("))]
        while not self._at(")"):
            param_children = [self._leaf(self._expect_type(), "primitive_type"),
                              self._leaf(self._expect_ident())]
            children.append(self._node("parameter_declaration", param_children))
            if self._at(","):
                children.append(self._leaf(self._advance()))
            elif not self._at(")"):
                raise _SyntaxFailure("expected ',' or ')' in parameter list")
        children.append(self._leaf(self._expect(")")))
        return self._node("parameter_list", children)

    def _expect_type(self) -> _Token:
        tok = self._peek()
        if tok is None or tok.text not in _TYPE_KEYWORDS:
            raise _SyntaxFailure(f"expected type keyword, got {tok.text if tok else 'EOF'!r}")
        return self._advance()

    def _expect_ident(self) -> _Token:
        tok = self._peek()
        if tok is None or tok.kind != "ident" or tok.text in _KEYWORDS:
            raise _SyntaxFailure(f"expected identifier, got {tok.text if tok else 'EOF'!r}")
        return self._advance()

    def _statement(self) -> int:
        mark = self.pos
        try:
            return self._statement_inner()
        except _SyntaxFailure:
            self.pos = mark
            return self._recover()

    def _statement_inner(self) -> int:
        tok = self._peek()
        if tok is None:
            raise _SyntaxFailure("expected statement, got end of input")
        if tok.text == "{":
            return self._compound_statement()
        if tok.text in _TYPE_KEYWORDS:
            return self._declaration()
        if tok.text == "if":
            return self._if_statement()
        if tok.text == "while":
            return self._while_statement()
        if tok.text == "for":
            return self._for_statement()
        if tok.text == "return":
            children = [self._leaf(self._advance())]
            if not self._at(";"):
                children.append(self._expression())
            children.append(self._leaf(self._expect(";")))
            return self._node("return_statement", children)
        if tok.text in ("break", "continue"):
            kw = self._leaf(self._advance())
            semi = self._leaf(self._expect(";"))
            return self._node(f"{tok.text}_statement", [kw, semi])
        expr = self._expression()
        semi = self._leaf(self._expect(";"))
        return self._node("expression_statement", [expr, semi])

    def _compound_statement(self) -> int:
        children = [self._leaf(self._expect("{"))]
        while not self._at("}"):
            if self._peek() is None:
                raise ParseError("unterminated block: missing '}'")
            children.append(self._statement())
        children.append(self._leaf(self._expect("}")))
        return self._node("compound_statement", children)

    def _declaration(self) -> int:
        type_leaf = self._leaf(self._advance(), "primitive_type")
        name = self._leaf(self._expect_ident())
        if self._at("="):
            eq = self._leaf(self._advance())
            value = self._expression()
            declarator = self._node("init_declarator", [name, eq, value])
        else:
            declarator = name
        semi = self._leaf(self._expect(";"))
        return self._node("declaration", [type_leaf, declarator, semi])

    def _if_statement(self) -> int:
        children = [self._leaf(self._expect("if")), self._condition()]
        children.append(self._statement())
        if self._at("else"):
            children.append(self._leaf(self._advance()))
            children.append(self._statement())
        return self._node("if_statement", children)

    def _while_statement(self) -> int:
        children = [self._leaf(self._expect("while")), self._condition(),
                    self._statement()]
        return self._node("while_statement", children)

    def _for_statement(self) -> int:
        children = [self._leaf(self._expect("for")), self._leaf(self._expect("("))]
        if self._at(";"):
            children.append(self._leaf(self._advance()))
        elif self._peek() is not None and self._peek().text in _TYPE_KEYWORDS:
            children.append(self._declaration())
        else:
            init = self._expression()
            children.append(self._node(
                "expression_statement", [init, self._leaf(self._expect(";"))]
            ))
        if not self._at(";"):
            children.append(self._expression())
        children.append(self._leaf(self._expect(";")))
        if not self._at(")"):
            children.append(self._expression())
        children.append(self._leaf(self._expect(")")))
        children.append(self._statement())
        return self._node("for_statement", children)

    def _condition(self) -> int:
        lparen = self._leaf(self._expect("("))
        expr = self._expression()
        rparen = self._leaf(self._expect(")"))
        return self._node("parenthesized_expression", [lparen, expr, rparen])

    # -- expressions ---------------------------------------------------------

    def _expression(self) -> int:
        left = self._binary(0)
        tok = self._peek()
        if tok is not None and tok.text in _ASSIGN_OPS:
            op = self._leaf(self._advance())
            right = self._expression()
            return self._node("assignment_expression", [left, op, right])
        return left

    def _binary(self, level: int) -> int:
        if level >= len(_BINARY_LEVELS):
            return self._unary()
        left = self._binary(level + 1)
        while True:
            tok = self._peek()
            if tok is None or tok.text not in _BINARY_LEVELS[level]:
                return left
            op = self._leaf(self._advance())
            right = self._binary(level + 1)
            left = self._node("binary_expression", [left, op, right])

    def _unary(self) -> int:
        tok = self._peek()
        if tok is not None and tok.text in ("-", "+", "!"):
            op = self._leaf(self._advance())
            return self._node("unary_expression", [op, self._unary()])
        if tok is not None and tok.text in ("++", "--"):
            op = self._leaf(self._advance())
            return self._node("update_expression", [op, self._unary()])
        return self._postfix()

    def _postfix(self) -> int:
        expr = self._primary()
        while True:
            tok = self._peek()
            if tok is not None and tok.text in ("++", "--"):
                expr = self._node("update_expression", [expr, self._leaf(self._advance())])
            else:
                return expr

    def _primary(self) -> int:
        tok = self._peek()
        if tok is None:
            raise _SyntaxFailure("expected expression, got end of input")
        if tok.text == "(":
            lparen = self._leaf(self._advance())
            inner = self._expression()
            rparen = self._leaf(self._expect(")"))
            return self._node("parenthesized_expression", [lparen, inner, rparen])
        if tok.kind == "number":
            return self._leaf(self._advance())
        if tok.text in ("true", "false"):
            return self._leaf(self._advance())
        if tok.kind == "ident" and tok.text not in _KEYWORDS:
            ident = self._leaf(self._advance())
            if self._at("("):
                args = [self._leaf(self._advance())]
                while not self._at(")"):
                    args.append(self._expression())
                    if self._at(","):
                        args.append(self._leaf(self._advance()))
                    elif not self._at(")"):
                        raise _SyntaxFailure("expected ',' or ')' in argument list")
                args.append(self._leaf(self._expect(")")))
                arg_list = self._node("argument_list", args)
                return self._node("call_expression", [ident, arg_list])
            return ident
        raise _SyntaxFailure(f"unexpected token {tok.text!r}")

    # -- error recovery ------------------------------------------------------

    def _recover(self) -> int:
        """Consume tokens up to a ';' (inclusive) or '}' and wrap as ERROR."""
        children: list[int] = []
        depth = 0
        while True:
            tok = self._peek()
            if tok is None:
                break
            if tok.text == "}" and depth == 0:
                break
            if tok.text == "{":
                depth += 1
            elif tok.text == "}":
                depth -= 1
            children.append(self._leaf(self._advance()))
            if tok.text == ";" and depth == 0:
                break
        if not children:
            raise ParseError("malformed source: nothing to recover into an ERROR node")
        return self._node("ERROR", children)


def parse_minilang(code: bytes, source_id: str = "<source>") -> AstTree:
    """Parse MiniLang source bytes into an :class:`AstTree`."""
    return _Parser(_tokenize(code), code, source_id).parse()
