"""OCL constraint syntax tree and its pretty printer.

Nodes are frozen dataclasses; their ``span`` (character offsets into the
source text) is excluded from equality so a printed and re-parsed tree
compares equal to the original.
"""
from __future__ import annotations

import dataclasses as d
import enum
import typing as t

Span = tuple[int, int]


class ConstraintKind(str, enum.Enum):
    INV = "inv"
    PRE = "pre"
    POST = "post"


ITERATORS = frozenset({"select", "reject", "collect", "forAll", "exists", "one", "any", "isUnique"})
COLLECTION_KINDS = frozenset({"Set", "Bag", "Sequence", "OrderedSet", "Collection"})


@d.dataclass(frozen=True)
class Expr:
    span: Span = d.field(default=(0, 0), compare=False, kw_only=True, repr=False)


@d.dataclass(frozen=True)
class SelfRef(Expr):
    pass


@d.dataclass(frozen=True)
class ResultRef(Expr):
    pass


@d.dataclass(frozen=True)
class VarRef(Expr):
    name: str


@d.dataclass(frozen=True)
class IntLit(Expr):
    value: int


@d.dataclass(frozen=True)
class RealLit(Expr):
    text: str


@d.dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@d.dataclass(frozen=True)
class StringLit(Expr):
    value: str


@d.dataclass(frozen=True)
class PropertyCall(Expr):
    """``source.name``; a ``None`` source is a bare ``name@pre``."""

    source: t.Optional[Expr]
    name: str
    at_pre: bool = False


@d.dataclass(frozen=True)
class OperationCall(Expr):
    source: t.Optional[Expr]
    name: str
    args: tuple[Expr, ...] = ()
    at_pre: bool = False


@d.dataclass(frozen=True)
class ArrowCall(Expr):
    source: Expr
    name: str
    args: tuple[Expr, ...] = ()


@d.dataclass(frozen=True)
class IteratorExp(Expr):
    source: Expr
    name: str
    var: t.Optional[str]
    body: Expr
    var_type: t.Optional[str] = None


@d.dataclass(frozen=True)
class AllInstances(Expr):
    type_name: str


@d.dataclass(frozen=True)
class IfExpr(Expr):
    cond: Expr
    then: Expr
    orelse: Expr


@d.dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@d.dataclass(frozen=True)
class Unary(Expr):
    op: str
    operand: Expr


@d.dataclass(frozen=True)
class Param:
    name: str
    type_name: str
    span: Span = d.field(default=(0, 0), compare=False, kw_only=True, repr=False)


@d.dataclass(frozen=True)
class OperationSignature:
    name: str
    params: tuple[Param, ...] = ()
    return_type: t.Optional[str] = None
    span: Span = d.field(default=(0, 0), compare=False, kw_only=True, repr=False)


@d.dataclass(frozen=True)
class OclConstraint:
    context_class: str
    kind: ConstraintKind
    body: Expr
    operation: t.Optional[OperationSignature] = None
    name: t.Optional[str] = None
    context_span: Span = d.field(default=(0, 0), compare=False, kw_only=True, repr=False)

    def __post_init__(self) -> None:
        if (self.kind is ConstraintKind.INV) != (self.operation is None):
            raise ValueError("invariants have no operation context; pre/post conditions always do")


# binding strength, loosest first
BINARY_PRECEDENCE: dict[str, int] = {
    "implies": 1,
    "or": 2,
    "xor": 2,
    "and": 3,
    "=": 5,
    "<>": 5,
    "<": 5,
    ">": 5,
    "<=": 5,
    ">=": 5,
    "+": 6,
    "-": 6,
    "*": 7,
    "/": 7,
}
NOT_PRECEDENCE = 4
NEGATION_PRECEDENCE = 8
POSTFIX_PRECEDENCE = 9
ATOM_PRECEDENCE = 10


def precedence(node: Expr) -> int:
    if isinstance(node, Binary):
        return BINARY_PRECEDENCE[node.op]
    if isinstance(node, Unary):
        return NOT_PRECEDENCE if node.op == "not" else NEGATION_PRECEDENCE
    if isinstance(node, (PropertyCall, OperationCall, ArrowCall, IteratorExp, AllInstances)):
        return POSTFIX_PRECEDENCE if getattr(node, "source", True) is not None else ATOM_PRECEDENCE
    return ATOM_PRECEDENCE


def _wrap(node: Expr, minimum: int) -> str:
    text = print_expr(node)
    return f"({text})" if precedence(node) < minimum else text


def _quote(value: str) -> str:
    escaped = value.replace("\\", "\\\\").replace("'", "\\'").replace("\n", "\\n").replace("\t", "\\t")
    return "'" + escaped + "'"


def _args(args: t.Sequence[Expr]) -> str:
    return ", ".join(print_expr(arg) for arg in args)


def print_expr(node: Expr) -> str:
    if isinstance(node, SelfRef):
        return "self"
    if isinstance(node, ResultRef):
        return "result"
    if isinstance(node, VarRef):
        return node.name
    if isinstance(node, IntLit):
        return str(node.value)
    if isinstance(node, RealLit):
        return node.text
    if isinstance(node, BoolLit):
        return "true" if node.value else "false"
    if isinstance(node, StringLit):
        return _quote(node.value)
    if isinstance(node, PropertyCall):
        suffix = "@pre" if node.at_pre else ""
        if node.source is None:
            return f"{node.name}{suffix}"
        return f"{_wrap(node.source, POSTFIX_PRECEDENCE)}.{node.name}{suffix}"
    if isinstance(node, OperationCall):
        call = f"{node.name}{'@pre' if node.at_pre else ''}({_args(node.args)})"
        if node.source is None:
            return call
        return f"{_wrap(node.source, POSTFIX_PRECEDENCE)}.{call}"
    if isinstance(node, ArrowCall):
        return f"{_wrap(node.source, POSTFIX_PRECEDENCE)}->{node.name}({_args(node.args)})"
    if isinstance(node, IteratorExp):
        head = ""
        if node.var is not None:
            head = f"{node.var} : {node.var_type} | " if node.var_type else f"{node.var} | "
        return f"{_wrap(node.source, POSTFIX_PRECEDENCE)}->{node.name}({head}{print_expr(node.body)})"
    if isinstance(node, AllInstances):
        return f"{node.type_name}.allInstances()"
    if isinstance(node, IfExpr):
        return f"if {print_expr(node.cond)} then {print_expr(node.then)} else {print_expr(node.orelse)} endif"
    if isinstance(node, Unary):
        if node.op == "not":
            return f"not {_wrap(node.operand, NOT_PRECEDENCE)}"
        operand = _wrap(node.operand, NEGATION_PRECEDENCE)
        # "--" opens a comment
        return f"-({operand})" if operand.startswith("-") else f"-{operand}"
    if isinstance(node, Binary):
        level = BINARY_PRECEDENCE[node.op]
        # operators are left-associative: a right operand of equal strength keeps its parentheses
        return f"{_wrap(node.left, level)} {node.op} {_wrap(node.right, level + 1)}"
    raise TypeError(f"not an OCL expression node: {node!r}")


def print_constraint(constraint: OclConstraint) -> str:
    header = f"context {constraint.context_class}"
    if constraint.operation is not None:
        operation = constraint.operation
        params = ", ".join(f"{param.name}: {param.type_name}" for param in operation.params)
        header += f"::{operation.name}({params})"
        if operation.return_type:
            header += f": {operation.return_type}"
    label = f" {constraint.name}" if constraint.name else ""
    return f"{header} {constraint.kind.value}{label}: {print_expr(constraint.body)}"
