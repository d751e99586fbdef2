"""Verilog source parsing into hierarchical syntax trees.

The parser covers a pragmatic subset: module declarations, port lists,
``assign``, ``always``/``initial`` blocks, ``if``/``else``, ``case`` items,
``begin...end`` blocks, assignments, and expressions.  Anything else becomes
a generic Statement node that still preserves nesting, because downstream
consumers only need hierarchical containment, never elaboration semantics.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator

from .errors import EmptyInput, UnparsableSource


class NodeKind(enum.IntEnum):
    """Node categories with stable integer codes (declaration order)."""

    Module = 0
    PortList = 1
    Always = 2
    Initial = 3
    Assign = 4
    If = 5
    Case = 6
    Block = 7
    Statement = 8
    Expr = 9
    Identifier = 10


# Reserved words of the supported subset plus the common SystemVerilog ones
# that show up in desk-scale RTL.  Tokens in this set never become signals.
VERILOG_KEYWORDS = frozenset(
    """
    module macromodule endmodule input output inout wire reg logic bit byte
    int integer longint shortint real realtime time signed unsigned
    parameter localparam genvar defparam specparam
    assign deassign force release
    always always_comb always_ff always_latch initial final
    begin end fork join join_any join_none
    if else case casex casez endcase default unique priority
    for while repeat forever do break continue return
    posedge negedge edge or and not nand nor xor xnor buf bufif0 bufif1
    notif0 notif1 pulldown pullup supply0 supply1 tri tri0 tri1 triand
    trior trireg wand wor
    function endfunction task endtask void
    generate endgenerate
    struct union enum typedef packed
    assert assume cover property endproperty sequence endsequence
    disable iff wait event negclk
    automatic static const var string inside
    """.split()
)

_DIRECTIVES_TO_EOL = frozenset(
    {"define", "include", "ifdef", "ifndef", "elsif", "else", "endif",
     "undef", "timescale", "default_nettype", "resetall"}
)

_OPEN = {"(": ")", "[": "]", "{": "}"}
_CLOSE = {")", "]", "}"}


@dataclass(eq=False)
class SyntaxNode:
    kind: NodeKind
    file_id: str
    span: tuple[int, int] = (0, 0)
    name: str = ""
    children: list["SyntaxNode"] = field(default_factory=list)
    parent: "SyntaxNode | None" = field(default=None, repr=False)
    depth: int = 0

    def iter_nodes(self) -> Iterator["SyntaxNode"]:
        """Pre-order traversal including self."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def root(self) -> "SyntaxNode":
        node = self
        while node.parent is not None:
            node = node.parent
        return node


@dataclass
class AstIndex:
    trees: list[SyntaxNode]
    signal_map: dict[str, list[SyntaxNode]]
    max_depth: int


def node_path(node: SyntaxNode) -> list[SyntaxNode]:
    """Root-to-node inclusive chain; path[k].depth == k."""
    path: list[SyntaxNode] = []
    cur: SyntaxNode | None = node
    while cur is not None:
        path.append(cur)
        cur = cur.parent
    path.reverse()
    return path


# ---------------------------------------------------------------------------
# tokenizer

_IDENT_START = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_$")
_IDENT_CHARS = _IDENT_START | frozenset("0123456789")
_DIGITS = frozenset("0123456789")
_BASE_CHARS = frozenset("sSdDbBoOhH")
_NUM_BODY = frozenset("0123456789abcdefABCDEFxXzZ_?")


@dataclass
class Token:
    type: str  # IDENT | NUMBER | STRING | PUNCT | DIRECTIVE
    text: str
    start: int
    end: int


class TokenizeFailure(Exception):
    def __init__(self, offset: int, reason: str):
        super().__init__(reason)
        self.offset = offset
        self.reason = reason


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n\f":
            i += 1
            continue
        if c == "/" and i + 1 < n:
            if text[i + 1] == "/":
                j = text.find("\n", i)
                i = n if j < 0 else j + 1
                continue
            if text[i + 1] == "*":
                j = text.find("*/", i + 2)
                if j < 0:
                    raise TokenizeFailure(i, "unterminated block comment")
                i = j + 2
                continue
        if c == '"':
            j = i + 1
            while j < n:
                if text[j] == "\\":
                    j += 2
                    continue
                if text[j] == '"':
                    break
                j += 1
            if j >= n:
                raise TokenizeFailure(i, "unterminated string literal")
            tokens.append(Token("STRING", text[i : j + 1], i, j + 1))
            i = j + 1
            continue
        if c == "`":
            j = i + 1
            while j < n and text[j] in _IDENT_CHARS:
                j += 1
            word = text[i + 1 : j]
            if word in _DIRECTIVES_TO_EOL:
                # keep the whole directive line (with continuations) as one
                # token; the parser turns it into an opaque Statement
                while j < n and text[j] != "\n":
                    if text[j] == "\\" and j + 1 < n and text[j + 1] == "\n":
                        j += 2
                        continue
                    j += 1
            tokens.append(Token("DIRECTIVE", text[i:j], i, j))
            i = j
            continue
        if c == "\\":
            j = i + 1
            while j < n and text[j] not in " \t\r\n\f":
                j += 1
            if j == i + 1:
                raise TokenizeFailure(i, "empty escaped identifier")
            tokens.append(Token("IDENT", text[i + 1 : j], i, j))
            i = j
            continue
        if c in _IDENT_START:
            j = i + 1
            while j < n and text[j] in _IDENT_CHARS:
                j += 1
            # merge hierarchical references a.b.c into one identifier token
            while j < n and text[j] == "." and j + 1 < n and text[j + 1] in _IDENT_START:
                j += 2
                while j < n and text[j] in _IDENT_CHARS:
                    j += 1
            tokens.append(Token("IDENT", text[i:j], i, j))
            i = j
            continue
        if c in _DIGITS or (c == "'" and i + 1 < n and text[i + 1] in _BASE_CHARS):
            j = i
            while j < n and text[j] in _DIGITS | {"_"}:
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1] in _DIGITS:
                j += 1
                while j < n and text[j] in _DIGITS | {"_"}:
                    j += 1
            if j < n and text[j] == "'":
                j += 1
                if j < n and text[j] in _BASE_CHARS:
                    j += 1
                while j < n and text[j] in _NUM_BODY:
                    j += 1
            tokens.append(Token("NUMBER", text[i:j], i, j))
            i = j
            continue
        tokens.append(Token("PUNCT", c, i, i + 1))
        i += 1
    return tokens


# ---------------------------------------------------------------------------
# parser

_STRUCTURED_LOOPS = frozenset({"for", "while", "repeat"})
_REGION_ENDS = {"function": "endfunction", "task": "endtask",
                "generate": "endgenerate", "property": "endproperty",
                "sequence": "endsequence"}
_STATEMENT_TERMINATORS = frozenset(
    {"end", "endcase", "endmodule", "endfunction", "endtask", "endgenerate",
     "else", "endproperty", "endsequence"}
)


class _Parser:
    def __init__(self, file_id: str, tokens: list[Token], source_len: int):
        self.file_id = file_id
        self.tokens = tokens
        self.pos = 0
        self.source_len = source_len

    # --- token plumbing ---

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def advance(self) -> Token:
        tok = self.peek()
        if tok is None:
            self.fail("unexpected end of file")
        self.pos += 1
        return tok

    def at_ident(self, *words: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.type == "IDENT" and tok.text in words

    def at_punct(self, *chars: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.type == "PUNCT" and tok.text in chars

    def expect_punct(self, ch: str) -> Token:
        if not self.at_punct(ch):
            self.fail(f"expected '{ch}'")
        return self.advance()

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok is None or tok.type != "IDENT" or tok.text in VERILOG_KEYWORDS:
            self.fail("expected identifier")
        return self.advance()

    def fail(self, reason: str) -> None:
        tok = self.peek()
        offset = tok.start if tok is not None else self.source_len
        raise UnparsableSource(self.file_id, offset, reason)

    # --- node helpers ---

    def node(self, kind: NodeKind, start: int, name: str = "") -> SyntaxNode:
        return SyntaxNode(kind=kind, file_id=self.file_id, span=(start, start), name=name)

    def close(self, node: SyntaxNode, end: int) -> SyntaxNode:
        node.span = (node.span[0], end)
        return node

    def ident_node(self, tok: Token) -> SyntaxNode:
        return SyntaxNode(kind=NodeKind.Identifier, file_id=self.file_id,
                          span=(tok.start, tok.end), name=tok.text)

    # --- grammar ---

    def parse_file(self) -> list[SyntaxNode]:
        roots: list[SyntaxNode] = []
        while self.peek() is not None:
            tok = self.peek()
            assert tok is not None
            if tok.type == "DIRECTIVE":
                self.advance()
                continue
            if tok.type == "IDENT" and tok.text in ("module", "macromodule"):
                roots.append(self.parse_module())
                continue
            self.fail("expected module declaration")
        return roots

    def parse_module(self) -> SyntaxNode:
        kw = self.advance()
        node = self.node(NodeKind.Module, kw.start)
        name_tok = self.expect_ident()
        node.name = name_tok.text
        node.children.append(self.ident_node(name_tok))
        if self.at_punct("#"):
            self.advance()
            node.children.append(self.parse_bracket_group())
        if self.at_punct("("):
            node.children.append(self.parse_port_list())
        self.expect_punct(";")
        while not self.at_ident("endmodule"):
            if self.peek() is None:
                self.fail("missing endmodule")
            node.children.append(self.parse_module_item())
        end_tok = self.advance()
        end = end_tok.end
        if self.at_punct(":"):
            self.advance()
            label = self.expect_ident()
            node.children.append(self.ident_node(label))
            end = label.end
        return self.close(node, end)

    def parse_port_list(self) -> SyntaxNode:
        open_tok = self.expect_punct("(")
        node = self.node(NodeKind.PortList, open_tok.start)
        while not self.at_punct(")"):
            tok = self.peek()
            if tok is None:
                self.fail("unterminated port list")
            assert tok is not None
            if tok.type == "PUNCT" and tok.text in _OPEN:
                node.children.append(self.parse_bracket_group())
                continue
            if tok.type == "PUNCT" and tok.text in _CLOSE:
                self.fail("mismatched bracket in port list")
            self.advance()
            if tok.type == "IDENT" and tok.text not in VERILOG_KEYWORDS and not tok.text.startswith("$"):
                node.children.append(self.ident_node(tok))
        close_tok = self.advance()
        return self.close(node, close_tok.end)

    def parse_module_item(self) -> SyntaxNode:
        tok = self.peek()
        assert tok is not None
        if tok.type == "DIRECTIVE":
            self.advance()
            return SyntaxNode(kind=NodeKind.Statement, file_id=self.file_id,
                              span=(tok.start, tok.end))
        if tok.type == "PUNCT" and tok.text == ";":
            self.advance()
            return SyntaxNode(kind=NodeKind.Statement, file_id=self.file_id,
                              span=(tok.start, tok.end))
        if tok.type == "IDENT":
            word = tok.text
            if word == "assign":
                return self.parse_assign()
            if word in ("always", "always_comb", "always_ff", "always_latch"):
                return self.parse_always()
            if word == "initial":
                return self.parse_initial()
            if word in _REGION_ENDS:
                return self.parse_region(word)
            if word in ("if", "case", "casex", "casez", "begin", "for",
                        "while", "repeat", "forever", "unique", "priority"):
                return self.parse_statement()
        return self.parse_generic_statement()

    def parse_assign(self) -> SyntaxNode:
        kw = self.advance()
        node = self.node(NodeKind.Assign, kw.start)
        node.children.append(self.parse_expr_until(stop_punct=("=",)))
        self.expect_punct("=")
        node.children.append(self.parse_expr_until(stop_punct=(";",)))
        end_tok = self.expect_punct(";")
        return self.close(node, end_tok.end)

    def parse_always(self) -> SyntaxNode:
        kw = self.advance()
        node = self.node(NodeKind.Always, kw.start)
        if self.at_punct("@"):
            self.advance()
            if self.at_punct("*"):
                self.advance()
            elif self.at_punct("("):
                node.children.append(self.parse_bracket_group())
            else:
                ev = self.expect_ident()
                wrapper = self.node(NodeKind.Expr, ev.start)
                wrapper.children.append(self.ident_node(ev))
                node.children.append(self.close(wrapper, ev.end))
        body = self.parse_statement()
        node.children.append(body)
        return self.close(node, body.span[1])

    def parse_initial(self) -> SyntaxNode:
        kw = self.advance()
        node = self.node(NodeKind.Initial, kw.start)
        body = self.parse_statement()
        node.children.append(body)
        return self.close(node, body.span[1])

    def parse_region(self, word: str) -> SyntaxNode:
        """function/task/generate/...: opaque container, nesting preserved."""
        kw = self.advance()
        end_word = _REGION_ENDS[word]
        node = self.node(NodeKind.Statement, kw.start)
        while not self.at_ident(end_word):
            if self.peek() is None:
                self.fail(f"missing {end_word}")
            node.children.append(self.parse_statement())
        end_tok = self.advance()
        end = end_tok.end
        if self.at_punct(":"):
            self.advance()
            label = self.expect_ident()
            node.children.append(self.ident_node(label))
            end = label.end
        return self.close(node, end)

    def parse_statement(self) -> SyntaxNode:
        tok = self.peek()
        if tok is None:
            self.fail("expected statement")
        assert tok is not None
        if tok.type == "DIRECTIVE":
            self.advance()
            return SyntaxNode(kind=NodeKind.Statement, file_id=self.file_id,
                              span=(tok.start, tok.end))
        if tok.type == "PUNCT" and tok.text == ";":
            self.advance()
            return SyntaxNode(kind=NodeKind.Statement, file_id=self.file_id,
                              span=(tok.start, tok.end))
        if tok.type == "IDENT":
            word = tok.text
            if word in ("unique", "priority"):
                self.advance()
                inner = self.parse_statement()
                inner.span = (tok.start, inner.span[1])
                return inner
            if word == "begin":
                return self.parse_block()
            if word == "if":
                return self.parse_if()
            if word in ("case", "casex", "casez"):
                return self.parse_case()
            if word in _STRUCTURED_LOOPS:
                return self.parse_loop(with_header=True)
            if word == "forever":
                return self.parse_loop(with_header=False)
            if word in _REGION_ENDS:
                return self.parse_region(word)
            if word in _STATEMENT_TERMINATORS:
                self.fail(f"unexpected '{word}'")
        return self.parse_generic_statement()

    def parse_block(self) -> SyntaxNode:
        kw = self.advance()
        node = self.node(NodeKind.Block, kw.start)
        if self.at_punct(":"):
            self.advance()
            label = self.expect_ident()
            node.children.append(self.ident_node(label))
        while not self.at_ident("end"):
            if self.peek() is None:
                self.fail("missing end")
            node.children.append(self.parse_statement())
        end_tok = self.advance()
        end = end_tok.end
        if self.at_punct(":"):
            self.advance()
            label = self.expect_ident()
            node.children.append(self.ident_node(label))
            end = label.end
        return self.close(node, end)

    def parse_if(self) -> SyntaxNode:
        kw = self.advance()
        node = self.node(NodeKind.If, kw.start)
        if not self.at_punct("("):
            self.fail("expected '(' after if")
        node.children.append(self.parse_bracket_group())
        then_branch = self.parse_statement()
        node.children.append(then_branch)
        end = then_branch.span[1]
        if self.at_ident("else"):
            self.advance()
            else_branch = self.parse_statement()
            node.children.append(else_branch)
            end = else_branch.span[1]
        return self.close(node, end)

    def parse_case(self) -> SyntaxNode:
        kw = self.advance()
        node = self.node(NodeKind.Case, kw.start)
        if not self.at_punct("("):
            self.fail(f"expected '(' after {kw.text}")
        node.children.append(self.parse_bracket_group())
        while not self.at_ident("endcase"):
            if self.peek() is None:
                self.fail("missing endcase")
            node.children.append(self.parse_case_item())
        end_tok = self.advance()
        return self.close(node, end_tok.end)

    def parse_case_item(self) -> SyntaxNode:
        tok = self.peek()
        assert tok is not None
        item = self.node(NodeKind.Statement, tok.start)
        labels = self.parse_expr_until(stop_punct=(":",))
        item.children.append(labels)
        self.expect_punct(":")
        body = self.parse_statement()
        item.children.append(body)
        return self.close(item, body.span[1])

    def parse_loop(self, with_header: bool) -> SyntaxNode:
        kw = self.advance()
        node = self.node(NodeKind.Statement, kw.start)
        if with_header:
            if not self.at_punct("("):
                self.fail(f"expected '(' after {kw.text}")
            node.children.append(self.parse_bracket_group())
        body = self.parse_statement()
        node.children.append(body)
        return self.close(node, body.span[1])

    def parse_generic_statement(self) -> SyntaxNode:
        """Assignments, declarations, instantiations: everything up to ';'."""
        tok = self.peek()
        assert tok is not None
        node = self.node(NodeKind.Statement, tok.start)
        node.children.append(self.parse_expr_until(stop_punct=(";",)))
        end_tok = self.expect_punct(";")
        return self.close(node, end_tok.end)

    def parse_expr_until(self, stop_punct: tuple[str, ...]) -> SyntaxNode:
        tok = self.peek()
        if tok is None:
            self.fail("expected expression")
        assert tok is not None
        node = self.node(NodeKind.Expr, tok.start)
        end = tok.start
        while True:
            tok = self.peek()
            if tok is None:
                self.fail("unterminated expression")
            assert tok is not None
            if tok.type == "PUNCT":
                if tok.text in stop_punct or tok.text == ";":
                    break
                if tok.text in _OPEN:
                    child = self.parse_bracket_group()
                    node.children.append(child)
                    end = child.span[1]
                    continue
                if tok.text in _CLOSE:
                    self.fail(f"unbalanced '{tok.text}'")
            if tok.type == "IDENT" and tok.text in _STATEMENT_TERMINATORS:
                break
            self.advance()
            end = tok.end
            if (tok.type == "IDENT" and tok.text not in VERILOG_KEYWORDS
                    and not tok.text.startswith("$")):
                node.children.append(self.ident_node(tok))
        return self.close(node, end)

    def parse_bracket_group(self) -> SyntaxNode:
        open_tok = self.advance()
        closing = _OPEN[open_tok.text]
        node = self.node(NodeKind.Expr, open_tok.start)
        while True:
            tok = self.peek()
            if tok is None:
                self.fail(f"missing '{closing}'")
            assert tok is not None
            if tok.type == "PUNCT":
                if tok.text == closing:
                    close_tok = self.advance()
                    return self.close(node, close_tok.end)
                if tok.text in _OPEN:
                    node.children.append(self.parse_bracket_group())
                    continue
                if tok.text in _CLOSE:
                    self.fail(f"mismatched '{tok.text}'")
            self.advance()
            if (tok.type == "IDENT" and tok.text not in VERILOG_KEYWORDS
                    and not tok.text.startswith("$")):
                node.children.append(self.ident_node(tok))


def _assign_parents(root: SyntaxNode) -> None:
    root.parent = None
    root.depth = 0
    stack = [root]
    while stack:
        node = stack.pop()
        for child in node.children:
            child.parent = node
            child.depth = node.depth + 1
            stack.append(child)


def parse_rtl(sources: list[tuple[str, str]]) -> AstIndex:
    """Parse Verilog sources into one tree per module declaration.

    Raises EmptyInput for an empty source list and UnparsableSource when a
    file cannot be segmented into the supported node hierarchy.
    """
    if not sources:
        raise EmptyInput("no RTL sources given")
    trees: list[SyntaxNode] = []
    for file_id, text in sources:
        try:
            tokens = tokenize(text)
        except TokenizeFailure as exc:
            raise UnparsableSource(file_id, exc.offset, exc.reason) from None
        parser = _Parser(file_id, tokens, len(text))
        trees.extend(parser.parse_file())
    signal_map: dict[str, list[SyntaxNode]] = {}
    max_depth = 0
    for root in trees:
        _assign_parents(root)
        for node in root.iter_nodes():
            if node.depth > max_depth:
                max_depth = node.depth
            if node.kind is NodeKind.Identifier:
                signal_map.setdefault(node.name, []).append(node)
                if "." in node.name:
                    leaf = node.name.rsplit(".", 1)[1]
                    signal_map.setdefault(leaf, []).append(node)
    return AstIndex(trees=trees, signal_map=signal_map, max_depth=max_depth)


def load_rtl_files(paths: list[str]) -> AstIndex:
    """Convenience wrapper: read files from disk and parse them."""
    sources: list[tuple[str, str]] = []
    for path in paths:
        with open(path, "r", encoding="utf-8") as fh:
            sources.append((path, fh.read()))
    return parse_rtl(sources)


# ---------------------------------------------------------------------------
# debug dump (schema ast-dump/v1)

def _dump_node(node: SyntaxNode) -> dict:
    out: dict = {
        "kind": node.kind.name,
        "depth": node.depth,
        "span": [node.span[0], node.span[1]],
        "children": [_dump_node(c) for c in node.children],
    }
    if node.name:
        out["name"] = node.name
    return out


def dump_ast(index: AstIndex) -> dict:
    return {
        "schema": "ast-dump/v1",
        "max_depth": index.max_depth,
        "trees": [
            {"file_id": root.file_id, "root": _dump_node(root)}
            for root in index.trees
        ],
    }
