"""Lexer and recursive-descent parser for the supported OCL subset.

Grammar::

    constraint := "context" Ident [ "::" Ident "(" params ")" [ ":" Type ] ]
                  ("inv" | "pre" | "post") [ Ident ] ":" expr
    Type       := Ident | Ident "(" Type ")"

Operator strength, loosest first: implies, or/xor, and, not, comparison,
additive, multiplicative, unary minus, postfix (``.`` and ``->``).
"""
from __future__ import annotations

import enum
import re
import typing as t

from . import ast
from .ast import ConstraintKind, Span


class OclSyntaxError(ValueError):
    def __init__(self, message: str, span: Span) -> None:
        self.span = span
        super().__init__(f"{message} at {span[0]}")


class TokenType(enum.Enum):
    IDENT = "identifier"
    INT = "integer"
    REAL = "real"
    STRING = "string"
    SYMBOL = "symbol"
    KEYWORD = "keyword"
    END = "end of input"


KEYWORDS = frozenset(
    {
        "context", "inv", "pre", "post", "self", "result", "true", "false",
        "if", "then", "else", "endif", "and", "or", "xor", "not", "implies",
    }
)

_SYMBOLS = ("->", "::", "<>", "<=", ">=", "=", "<", ">", "+", "-", "*", "/", ".", ",", "(", ")", ":", "|", "@")

_TOKEN_RE = re.compile(
    r"""
    (?P<space>\s+)
  | (?P<comment>--[^\n]*)
  | (?P<real>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>'(?:\\.|[^'\\\n])*')
  | (?P<symbol>""" + "|".join(re.escape(symbol) for symbol in _SYMBOLS) + r""")
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", "'": "'", "\\": "\\"}


class Token(t.NamedTuple):
    token_type: TokenType
    text: str
    start: int
    end: int

    @property
    def span(self) -> Span:
        return (self.start, self.end)


def _unescape(literal: str) -> str:
    return re.sub(r"\\(.)", lambda match: _ESCAPES.get(match.group(1), match.group(1)), literal[1:-1])


def lex(code: str) -> t.Iterator[Token]:
    position = 0
    while position < len(code):
        match = _TOKEN_RE.match(code, position)
        if match is None:
            if code[position] == "'":
                raise OclSyntaxError("unterminated string literal", (position, len(code)))
            raise OclSyntaxError(f"unexpected character {code[position]!r}", (position, position + 1))
        kind = match.lastgroup
        text = match.group()
        start, position = match.start(), match.end()
        if kind in ("space", "comment"):
            continue
        if kind == "ident":
            yield Token(TokenType.KEYWORD if text in KEYWORDS else TokenType.IDENT, text, start, position)
        elif kind == "int":
            yield Token(TokenType.INT, text, start, position)
        elif kind == "real":
            yield Token(TokenType.REAL, text, start, position)
        elif kind == "string":
            yield Token(TokenType.STRING, _unescape(text), start, position)
        else:
            yield Token(TokenType.SYMBOL, text, start, position)
    yield Token(TokenType.END, "", len(code), len(code))


Expected = t.Union[TokenType, str, t.AbstractSet[str]]


class TokenStream:
    def __init__(self, code: str) -> None:
        self.code = code
        self._tokens = list(lex(code))
        self._index = 0

    @property
    def current(self) -> Token:
        return self._tokens[self._index]

    @property
    def previous(self) -> Token:
        return self._tokens[max(0, self._index - 1)]

    def peek(self, offset: int = 1) -> Token:
        return self._tokens[min(self._index + offset, len(self._tokens) - 1)]

    def consume(self) -> Token:
        token = self.current
        if token.token_type is not TokenType.END:
            self._index += 1
        return token

    def _matches(self, token: Token, expected: Expected) -> bool:
        if isinstance(expected, TokenType):
            return token.token_type is expected
        if token.token_type in (TokenType.STRING, TokenType.END):
            return False
        if isinstance(expected, str):
            return token.text == expected
        return token.text in expected

    def accept(self, expected: Expected) -> t.Optional[Token]:
        if self._matches(self.current, expected):
            return self.consume()
        return None

    def check(self, expected: Expected, offset: int = 0) -> bool:
        return self._matches(self.peek(offset), expected)

    def expect(self, expected: Expected, what: t.Optional[str] = None) -> Token:
        token = self.accept(expected)
        if token is None:
            raise self.error(f"expected {what or _describe(expected)}")
        return token

    def error(self, message: str, token: t.Optional[Token] = None) -> OclSyntaxError:
        token = token or self.current
        found = token.token_type.value if token.token_type is TokenType.END else repr(token.text)
        return OclSyntaxError(f"{message}, found {found}", token.span)


def _describe(expected: Expected) -> str:
    if isinstance(expected, TokenType):
        return expected.value
    if isinstance(expected, str):
        return repr(expected)
    return " or ".join(repr(item) for item in sorted(expected))


_COMPARISON = frozenset({"=", "<>", "<", ">", "<=", ">="})
_CONSTRAINT_KINDS = frozenset(kind.value for kind in ConstraintKind)


class Parser:
    def __init__(self, code: str) -> None:
        self.stream = TokenStream(code)
        self.kind: t.Optional[ConstraintKind] = None

    def _span_from(self, start: int) -> Span:
        return (start, self.stream.previous.end)

    # -- header -------------------------------------------------------------

    def parse_constraint(self) -> ast.OclConstraint:
        stream = self.stream
        if stream.check(TokenType.END):
            raise stream.error("empty constraint: expected 'context'")
        stream.expect("context")
        context = stream.expect(TokenType.IDENT, "a context class name")

        operation: t.Optional[ast.OperationSignature] = None
        if stream.accept("::"):
            operation = self._operation_signature()

        kind_token = stream.expect(_CONSTRAINT_KINDS, "'inv', 'pre' or 'post'")
        self.kind = ConstraintKind(kind_token.text)
        if operation is not None and self.kind is ConstraintKind.INV:
            raise OclSyntaxError(
                "the keyword 'inv' cannot follow an operation signature; use 'pre' or 'post'",
                kind_token.span,
            )
        if operation is None and self.kind is not ConstraintKind.INV:
            raise OclSyntaxError(
                f"'{self.kind.value}' needs an operation context such as {context.text}::op()",
                kind_token.span,
            )
        name = stream.accept(TokenType.IDENT)
        stream.expect(":")
        body = self.parse_expression()
        if not stream.check(TokenType.END):
            raise stream.error("unexpected text after the constraint body")
        return ast.OclConstraint(
            context_class=context.text,
            kind=self.kind,
            body=body,
            operation=operation,
            name=name.text if name else None,
            context_span=context.span,
        )

    def _operation_signature(self) -> ast.OperationSignature:
        stream = self.stream
        name = stream.expect(TokenType.IDENT, "an operation name")
        stream.expect("(")
        params: list[ast.Param] = []
        if not stream.check(")"):
            while True:
                param = stream.expect(TokenType.IDENT, "a parameter name")
                stream.expect(":")
                params.append(ast.Param(param.text, self._type_name(), span=self._span_from(param.start)))
                if not stream.accept(","):
                    break
        stream.expect(")")
        return_type = self._type_name() if stream.accept(":") else None
        return ast.OperationSignature(name.text, tuple(params), return_type, span=self._span_from(name.start))

    def _type_name(self) -> str:
        stream = self.stream
        head = stream.expect(TokenType.IDENT, "a type name").text
        if head in ast.COLLECTION_KINDS and stream.accept("("):
            inner = self._type_name()
            stream.expect(")")
            return f"{head}({inner})"
        return head

    # -- expressions ----------------------------------------------------------

    def parse_expression(self) -> ast.Expr:
        return self._implies()

    def _binary_level(self, operators: t.AbstractSet[str], operand: t.Callable[[], ast.Expr]) -> ast.Expr:
        start = self.stream.current.start
        left = operand()
        while True:
            token = self.stream.accept(operators)
            if token is None:
                return left
            right = operand()
            left = ast.Binary(token.text, left, right, span=self._span_from(start))

    def _implies(self) -> ast.Expr:
        return self._binary_level(frozenset({"implies"}), self._or)

    def _or(self) -> ast.Expr:
        return self._binary_level(frozenset({"or", "xor"}), self._and)

    def _and(self) -> ast.Expr:
        return self._binary_level(frozenset({"and"}), self._not)

    def _not(self) -> ast.Expr:
        token = self.stream.accept("not")
        if token is None:
            return self._comparison()
        operand = self._not()
        return ast.Unary("not", operand, span=self._span_from(token.start))

    def _comparison(self) -> ast.Expr:
        return self._binary_level(_COMPARISON, self._additive)

    def _additive(self) -> ast.Expr:
        return self._binary_level(frozenset({"+", "-"}), self._multiplicative)

    def _multiplicative(self) -> ast.Expr:
        return self._binary_level(frozenset({"*", "/"}), self._unary)

    def _unary(self) -> ast.Expr:
        token = self.stream.accept("-")
        if token is None:
            return self._postfix()
        operand = self._unary()
        return ast.Unary("-", operand, span=self._span_from(token.start))

    def _postfix(self) -> ast.Expr:
        stream = self.stream
        start = stream.current.start
        node = self._primary()
        while True:
            if stream.accept("."):
                name = stream.expect(TokenType.IDENT, "a property or operation name")
                if name.text == "allInstances" and isinstance(node, ast.VarRef) and stream.check("("):
                    stream.expect("(")
                    stream.expect(")")
                    node = ast.AllInstances(node.name, span=self._span_from(start))
                    continue
                at_pre = self._at_pre()
                if stream.accept("("):
                    args = self._arguments()
                    node = ast.OperationCall(node, name.text, args, at_pre, span=self._span_from(start))
                else:
                    node = ast.PropertyCall(node, name.text, at_pre, span=self._span_from(start))
            elif stream.accept("->"):
                name = stream.expect(TokenType.IDENT, "a collection operation name")
                stream.expect("(")
                if name.text in ast.ITERATORS:
                    node = self._iterator(node, name.text, start)
                else:
                    node = ast.ArrowCall(node, name.text, self._arguments(), span=self._span_from(start))
            else:
                return node

    def _iterator(self, source: ast.Expr, name: str, start: int) -> ast.Expr:
        stream = self.stream
        var: t.Optional[str] = None
        var_type: t.Optional[str] = None
        if stream.check(TokenType.IDENT) and (stream.check("|", 1) or stream.check(":", 1)):
            var = stream.consume().text
            if stream.accept(":"):
                var_type = self._type_name()
            stream.expect("|")
        body = self.parse_expression()
        stream.expect(")")
        return ast.IteratorExp(source, name, var, body, var_type, span=self._span_from(start))

    def _arguments(self) -> tuple[ast.Expr, ...]:
        """Parse a comma-separated argument list; the opening parenthesis is already consumed."""

        stream = self.stream
        args: list[ast.Expr] = []
        if not stream.check(")"):
            args.append(self.parse_expression())
            while stream.accept(","):
                args.append(self.parse_expression())
        stream.expect(")")
        return tuple(args)

    def _at_pre(self) -> bool:
        stream = self.stream
        marker = stream.accept("@")
        if marker is None:
            return False
        stream.expect("pre", "'pre' after '@'")
        if self.kind is not ConstraintKind.POST:
            raise OclSyntaxError("'@pre' is only allowed in post-conditions", self._span_from(marker.start))
        return True

    def _primary(self) -> ast.Expr:
        stream = self.stream
        token = stream.current
        span = token.span
        if stream.accept(TokenType.INT):
            return ast.IntLit(int(token.text), span=span)
        if stream.accept(TokenType.REAL):
            return ast.RealLit(token.text, span=span)
        if stream.accept(TokenType.STRING):
            return ast.StringLit(token.text, span=span)
        if stream.accept("true") or stream.accept("false"):
            return ast.BoolLit(token.text == "true", span=span)
        if stream.accept("self"):
            return ast.SelfRef(span=span)
        if stream.accept("result"):
            if self.kind is not ConstraintKind.POST:
                raise OclSyntaxError("'result' is only allowed in post-conditions", span)
            return ast.ResultRef(span=span)
        if stream.accept("("):
            inner = self.parse_expression()
            stream.expect(")")
            return inner
        if stream.accept("if"):
            cond = self.parse_expression()
            stream.expect("then")
            then = self.parse_expression()
            stream.expect("else")
            orelse = self.parse_expression()
            stream.expect("endif")
            return ast.IfExpr(cond, then, orelse, span=self._span_from(token.start))
        if stream.accept(TokenType.IDENT):
            at_pre = self._at_pre()
            if stream.accept("("):
                args = self._arguments()
                return ast.OperationCall(None, token.text, args, at_pre, span=self._span_from(token.start))
            if at_pre:
                return ast.PropertyCall(None, token.text, True, span=self._span_from(token.start))
            return ast.VarRef(token.text, span=span)
        raise stream.error("expected an expression")


def parse(text: str) -> ast.OclConstraint:
    """Parse one OCL constraint; raises :class:`OclSyntaxError` on malformed input."""

    try:
        return Parser(text).parse_constraint()
    except RecursionError:
        raise OclSyntaxError("expression nests too deeply", (0, len(text))) from None
