"""Semantic checking of parsed OCL constraints against a UML class model.

Every failure maps onto one of four categories:

* ``PARSING_ERROR``: the text does not parse.
* ``UNDEFINED_OPERATION``: a class, property, operation or name does not resolve.
* ``ITEREXP_INVALID_SOURCE``: an arrow operation or iterator is applied to a single object.
* ``SIGNATURE_MISMATCH``: a resolved operation gets the wrong arguments, or operand
  types do not fit an operator, a built-in or an iterator body.

The first failure found in a depth-first, left-to-right walk wins.
"""
from __future__ import annotations

import dataclasses as d
import typing as t

from common.logging_setup import get_stage_logger
from common.models import ErrorCategory
from common.schemas import CheckError, CheckVerdict, UmlModel, UmlOperation
from services.model.loader import class_of, navigations_of

from . import ast
from . import types as ty
from .parser import OclSyntaxError, parse

logger = get_stage_logger("oclcheck")


class OclCheckError(Exception):
    def __init__(self, category: ErrorCategory, message: str, span: ast.Span) -> None:
        self.category = category
        self.message = message
        self.span = span
        super().__init__(message)


def _undefined(message: str, node: t.Any) -> OclCheckError:
    return OclCheckError(ErrorCategory.UNDEFINED_OPERATION, message, node.span)


def _mismatch(message: str, node: t.Any) -> OclCheckError:
    return OclCheckError(ErrorCategory.SIGNATURE_MISMATCH, message, node.span)


def _invalid_source(message: str, node: t.Any) -> OclCheckError:
    return OclCheckError(ErrorCategory.ITEREXP_INVALID_SOURCE, message, node.span)


@d.dataclass(frozen=True)
class _Frame:
    variables: t.Mapping[str, ty.OclType] = d.field(default_factory=dict)
    implicit: t.Optional[ty.OclType] = None


# arrow operation -> number of arguments
_COLLECTION_OPS = {
    "size": 0,
    "isEmpty": 0,
    "notEmpty": 0,
    "sum": 0,
    "includes": 1,
    "excludes": 1,
    "includesAll": 1,
    "excludesAll": 1,
    "asSet": 0,
    "asSequence": 0,
    "asBag": 0,
    "first": 0,
    "last": 0,
}
_CONVERSIONS = {"asSet": "Set", "asSequence": "Sequence", "asBag": "Bag"}
_BOOLEAN_BODY = frozenset({"select", "reject", "forAll", "exists", "one", "any"})
_ORDERED = frozenset({"Sequence", "OrderedSet"})

_STRING_OPS: dict[str, tuple[tuple[ty.OclType, ...], ty.OclType]] = {
    "size": ((), ty.INTEGER),
    "concat": ((ty.STRING,), ty.STRING),
    "substring": ((ty.INTEGER, ty.INTEGER), ty.STRING),
    "toUpper": ((), ty.STRING),
    "toLower": ((), ty.STRING),
}
_NUMERIC_OPS = {"abs": 0, "floor": 0, "round": 0, "max": 1, "min": 1, "div": 1, "mod": 1}
_TYPE_TESTS = frozenset({"oclIsKindOf", "oclIsTypeOf", "oclAsType"})


class Checker:
    """Type-checks one constraint body with ``self`` bound to the context class."""

    def __init__(self, model: UmlModel, constraint: ast.OclConstraint) -> None:
        self.model = model
        self.constraint = constraint
        self.self_type: ty.OclType = ty.UNKNOWN
        self.result_type: ty.OclType = ty.UNKNOWN

    def run(self) -> None:
        constraint = self.constraint
        if class_of(self.model, constraint.context_class) is None:
            raise OclCheckError(
                ErrorCategory.UNDEFINED_OPERATION,
                f"context class {constraint.context_class!r} is not defined in model {self.model.name!r}",
                constraint.context_span,
            )
        self.self_type = ty.ClassType(constraint.context_class)
        outer = _Frame()
        if constraint.operation is not None:
            outer = _Frame(variables=self._bind_operation(constraint.operation))

        body_type = self.visit(constraint.body, (outer,))
        if not ty.is_boolean(body_type):
            raise _mismatch(f"a constraint body must be Boolean, got {body_type}", constraint.body)

    def _bind_operation(self, signature: ast.OperationSignature) -> dict[str, ty.OclType]:
        uml_class = class_of(self.model, self.constraint.context_class)
        assert uml_class is not None
        declared = uml_class.operations_named(signature.name)
        if not declared:
            raise _undefined(f"class {uml_class.name!r} has no operation {signature.name!r}", signature)
        matching = [operation for operation in declared if operation.arity == len(signature.params)]
        if not matching:
            raise _mismatch(
                f"{uml_class.name}::{declared[0].signature()} takes {declared[0].arity} parameter(s), "
                f"the context declares {len(signature.params)}",
                signature,
            )
        operation = matching[0]
        for written, param in zip(signature.params, operation.params):
            if written.type_name.replace(" ", "") != param.type_name.replace(" ", ""):
                raise _mismatch(
                    f"parameter {written.name!r} is declared {written.type_name}, the model says {param.type_name}",
                    written,
                )
        if signature.return_type and operation.return_type_name:
            if signature.return_type.replace(" ", "") != operation.return_type_name.replace(" ", ""):
                raise _mismatch(
                    f"{signature.name} returns {operation.return_type_name}, the context declares {signature.return_type}",
                    signature,
                )
        self.result_type = ty.type_from_name(operation.return_type_name or signature.return_type, self.model)
        return {written.name: ty.type_from_name(param.type_name, self.model) for written, param in zip(signature.params, operation.params)}

    # -- dispatch -------------------------------------------------------------

    def visit(self, node: ast.Expr, scope: tuple[_Frame, ...]) -> ty.OclType:
        method = getattr(self, f"_visit_{type(node).__name__}")
        return method(node, scope)

    def _visit_SelfRef(self, node: ast.SelfRef, scope: tuple[_Frame, ...]) -> ty.OclType:
        return self.self_type

    def _visit_ResultRef(self, node: ast.ResultRef, scope: tuple[_Frame, ...]) -> ty.OclType:
        return self.result_type

    def _visit_IntLit(self, node: ast.IntLit, scope: tuple[_Frame, ...]) -> ty.OclType:
        return ty.INTEGER

    def _visit_RealLit(self, node: ast.RealLit, scope: tuple[_Frame, ...]) -> ty.OclType:
        return ty.REAL

    def _visit_BoolLit(self, node: ast.BoolLit, scope: tuple[_Frame, ...]) -> ty.OclType:
        return ty.BOOLEAN

    def _visit_StringLit(self, node: ast.StringLit, scope: tuple[_Frame, ...]) -> ty.OclType:
        return ty.STRING

    def _visit_VarRef(self, node: ast.VarRef, scope: tuple[_Frame, ...]) -> ty.OclType:
        for frame in reversed(scope):
            if node.name in frame.variables:
                return frame.variables[node.name]
        return self._implicit_property(node.name, node, scope)

    def _visit_PropertyCall(self, node: ast.PropertyCall, scope: tuple[_Frame, ...]) -> ty.OclType:
        if node.source is None:
            return self._implicit_property(node.name, node, scope)
        return self._property(self.visit(node.source, scope), node.name, node)

    def _visit_OperationCall(self, node: ast.OperationCall, scope: tuple[_Frame, ...]) -> ty.OclType:
        if node.source is None:
            owner = self._implicit_owner(node.name, scope)
        else:
            owner = self.visit(node.source, scope)
        if node.name in _TYPE_TESTS:
            return self._type_test(node)
        arg_types = [self.visit(arg, scope) for arg in node.args]
        return self._operation(owner, node, arg_types)

    def _visit_ArrowCall(self, node: ast.ArrowCall, scope: tuple[_Frame, ...]) -> ty.OclType:
        source = self.visit(node.source, scope)
        kind, element = self._collection_source(source, node)
        if node.name not in _COLLECTION_OPS:
            raise _undefined(f"collection operation {node.name!r} is not defined", node)
        arg_types = [self.visit(arg, scope) for arg in node.args]
        expected = _COLLECTION_OPS[node.name]
        if len(arg_types) != expected:
            raise _mismatch(f"{node.name}() takes {expected} argument(s) but {len(arg_types)} were given", node)

        if node.name == "size":
            return ty.INTEGER
        if node.name in ("isEmpty", "notEmpty", "includes", "excludes"):
            return ty.BOOLEAN
        if node.name in ("includesAll", "excludesAll"):
            if not (ty.is_collection(arg_types[0]) or ty.is_unknown(arg_types[0])):
                raise _mismatch(f"{node.name}() expects a collection argument, got {arg_types[0]}", node)
            return ty.BOOLEAN
        if node.name == "sum":
            if not ty.is_numeric(element):
                raise _mismatch(f"sum() needs numeric elements, got {element}", node)
            return element
        if node.name in _CONVERSIONS:
            return ty.CollectionType(_CONVERSIONS[node.name], element)
        return element  # first / last

    def _visit_IteratorExp(self, node: ast.IteratorExp, scope: tuple[_Frame, ...]) -> ty.OclType:
        source = self.visit(node.source, scope)
        kind, element = self._collection_source(source, node)
        if node.var_type is not None:
            declared = ty.type_from_name(node.var_type, self.model)
            if ty.is_unknown(element):
                element = declared
            elif not ty.names_match(element, node.var_type):
                raise _mismatch(f"iterator variable {node.var!r} is declared {node.var_type}, elements are {element}", node)
        if node.var is not None:
            frame = _Frame(variables={node.var: element})
        else:
            frame = _Frame(implicit=element)
        body = self.visit(node.body, scope + (frame,))

        if node.name in _BOOLEAN_BODY and not ty.is_boolean(body):
            raise _mismatch(f"the body of {node.name} must be Boolean, got {body}", node.body)
        if node.name in ("select", "reject"):
            return ty.CollectionType(kind, element)
        if node.name == "collect":
            return ty.CollectionType("Sequence" if kind in _ORDERED else "Bag", ty.flatten(body))
        if node.name == "any":
            return element
        return ty.BOOLEAN

    def _visit_AllInstances(self, node: ast.AllInstances, scope: tuple[_Frame, ...]) -> ty.OclType:
        if class_of(self.model, node.type_name) is None:
            raise _undefined(f"allInstances() on {node.type_name!r}, which is not a class of the model", node)
        return ty.CollectionType("Set", ty.ClassType(node.type_name))

    def _visit_IfExpr(self, node: ast.IfExpr, scope: tuple[_Frame, ...]) -> ty.OclType:
        cond = self.visit(node.cond, scope)
        if not ty.is_boolean(cond):
            raise _mismatch(f"if-condition must be Boolean, got {cond}", node.cond)
        return ty.common_type(self.visit(node.then, scope), self.visit(node.orelse, scope))

    def _visit_Unary(self, node: ast.Unary, scope: tuple[_Frame, ...]) -> ty.OclType:
        operand = self.visit(node.operand, scope)
        if node.op == "not":
            if not ty.is_boolean(operand):
                raise _mismatch(f"'not' expects a Boolean operand, got {operand}", node)
            return ty.BOOLEAN
        if not ty.is_numeric(operand):
            raise _mismatch(f"unary '-' expects a numeric operand, got {operand}", node)
        return operand

    def _visit_Binary(self, node: ast.Binary, scope: tuple[_Frame, ...]) -> ty.OclType:
        left = self.visit(node.left, scope)
        right = self.visit(node.right, scope)
        op = node.op
        if op in ("and", "or", "xor", "implies"):
            if not (ty.is_boolean(left) and ty.is_boolean(right)):
                raise _mismatch(f"'{op}' expects Boolean operands, got {left} and {right}", node)
            return ty.BOOLEAN
        if op in ("=", "<>"):
            return ty.BOOLEAN
        if op in ("<", ">", "<=", ">="):
            strings = all(side == ty.STRING or ty.is_unknown(side) for side in (left, right))
            if not (strings or (ty.is_numeric(left) and ty.is_numeric(right))):
                raise _mismatch(f"'{op}' cannot compare {left} with {right}", node)
            return ty.BOOLEAN
        if not (ty.is_numeric(left) and ty.is_numeric(right)):
            raise _mismatch(f"'{op}' expects numeric operands, got {left} and {right}", node)
        if op == "/":
            return ty.REAL
        return ty.numeric_result(left, right)

    # -- resolution -------------------------------------------------------------

    def _class_property(self, owner: ty.ClassType, name: str) -> t.Optional[ty.OclType]:
        uml_class = class_of(self.model, owner.name)
        if uml_class is None:
            return None
        attribute = uml_class.attribute(name)
        if attribute is not None:
            return ty.type_from_name(attribute.type_name, self.model)
        for navigation in navigations_of(self.model, owner.name):
            if navigation.role == name:
                return ty.navigation_type(navigation.target, navigation.multiplicity)
        return None

    def _property(self, owner: ty.OclType, name: str, node: ast.Expr) -> ty.OclType:
        if isinstance(owner, ty.UnknownType):
            return ty.UNKNOWN
        if isinstance(owner, ty.CollectionType):
            # shorthand for collect: coll.prop == coll->collect(prop)
            inner = self._property(owner.element, name, node)
            return ty.CollectionType("Sequence" if owner.kind in _ORDERED else "Bag", ty.flatten(inner))
        if isinstance(owner, ty.ClassType):
            found = self._class_property(owner, name)
            if found is not None:
                return found
            raise _undefined(f"property {name!r} is not defined for class {owner.name!r}", node)
        raise _undefined(f"{owner} has no property {name!r}", node)

    def _implicit_property(self, name: str, node: ast.Expr, scope: tuple[_Frame, ...]) -> ty.OclType:
        for frame in reversed(scope):
            if isinstance(frame.implicit, ty.ClassType):
                found = self._class_property(frame.implicit, name)
                if found is not None:
                    return found
        found = self._class_property(t.cast(ty.ClassType, self.self_type), name)
        if found is not None:
            return found
        raise _undefined(f"undefined name {name!r}", node)

    def _implicit_owner(self, name: str, scope: tuple[_Frame, ...]) -> ty.OclType:
        for frame in reversed(scope):
            if isinstance(frame.implicit, ty.ClassType) and self._declared_operations(frame.implicit, name):
                return frame.implicit
        return self.self_type

    def _declared_operations(self, owner: ty.ClassType, name: str) -> list[UmlOperation]:
        uml_class = class_of(self.model, owner.name)
        return uml_class.operations_named(name) if uml_class else []

    def _operation(self, owner: ty.OclType, node: ast.OperationCall, arg_types: list[ty.OclType]) -> ty.OclType:
        if node.name == "oclIsUndefined":
            if arg_types:
                raise _mismatch("oclIsUndefined() takes no arguments", node)
            return ty.BOOLEAN
        if isinstance(owner, ty.UnknownType):
            return ty.UNKNOWN
        if isinstance(owner, ty.CollectionType):
            inner = self._operation(owner.element, node, arg_types)
            return ty.CollectionType("Sequence" if owner.kind in _ORDERED else "Bag", ty.flatten(inner))
        if isinstance(owner, ty.ClassType):
            return self._model_operation(owner, node, arg_types)
        if owner == ty.STRING and node.name in _STRING_OPS:
            params, result = _STRING_OPS[node.name]
            self._check_builtin_args(node, params, arg_types)
            return result
        if owner in (ty.INTEGER, ty.REAL) and node.name in _NUMERIC_OPS:
            return self._numeric_operation(owner, node, arg_types)
        raise _undefined(f"operation {node.name!r} is not defined for {owner}", node)

    def _model_operation(self, owner: ty.ClassType, node: ast.OperationCall, arg_types: list[ty.OclType]) -> ty.OclType:
        declared = self._declared_operations(owner, node.name)
        if not declared:
            raise _undefined(f"operation {node.name!r} is not defined for class {owner.name!r}", node)
        matching = [operation for operation in declared if operation.arity == len(arg_types)]
        if not matching:
            expected = " or ".join(sorted({str(operation.arity) for operation in declared}))
            raise _mismatch(
                f"{owner.name}::{declared[0].signature()} takes {expected} argument(s) but {len(arg_types)} were given",
                node,
            )
        operation = matching[0]
        for position, (param, actual) in enumerate(zip(operation.params, arg_types), start=1):
            if not ty.names_match(actual, param.type_name):
                raise _mismatch(
                    f"argument {position} of {owner.name}::{operation.name} must be {param.type_name}, got {actual}",
                    node.args[position - 1],
                )
        return ty.type_from_name(operation.return_type_name, self.model)

    def _check_builtin_args(
        self, node: ast.OperationCall, params: t.Sequence[ty.OclType], arg_types: t.Sequence[ty.OclType]
    ) -> None:
        if len(arg_types) != len(params):
            raise _mismatch(f"{node.name}() takes {len(params)} argument(s) but {len(arg_types)} were given", node)
        for position, (param, actual) in enumerate(zip(params, arg_types), start=1):
            if not (actual == param or ty.is_unknown(actual)):
                raise _mismatch(f"argument {position} of {node.name}() must be {param}, got {actual}", node)

    def _numeric_operation(self, owner: ty.OclType, node: ast.OperationCall, arg_types: list[ty.OclType]) -> ty.OclType:
        expected = _NUMERIC_OPS[node.name]
        if len(arg_types) != expected:
            raise _mismatch(f"{node.name}() takes {expected} argument(s) but {len(arg_types)} were given", node)
        if node.name in ("floor", "round"):
            return ty.INTEGER
        if node.name == "abs":
            return owner
        if node.name in ("div", "mod"):
            if owner != ty.INTEGER or not (arg_types[0] == ty.INTEGER or ty.is_unknown(arg_types[0])):
                raise _mismatch(f"{node.name}() is defined on Integer operands only", node)
            return ty.INTEGER
        if not ty.is_numeric(arg_types[0]):
            raise _mismatch(f"{node.name}() expects a numeric argument, got {arg_types[0]}", node)
        return ty.numeric_result(owner, arg_types[0])

    def _type_test(self, node: ast.OperationCall) -> ty.OclType:
        if len(node.args) != 1:
            raise _mismatch(f"{node.name}() takes exactly one type argument", node)
        arg = node.args[0]
        if not isinstance(arg, ast.VarRef):
            raise _mismatch(f"{node.name}() expects a type name", arg)
        target = ty.type_from_name(arg.name, self.model)
        if ty.is_unknown(target):
            raise _undefined(f"type {arg.name!r} is not defined", arg)
        return target if node.name == "oclAsType" else ty.BOOLEAN

    def _collection_source(self, source: ty.OclType, node: ast.Expr) -> tuple[str, ty.OclType]:
        if isinstance(source, ty.CollectionType):
            return source.kind, source.element
        if isinstance(source, ty.UnknownType):
            return "Collection", ty.UNKNOWN
        name = node.name  # type: ignore[attr-defined]
        raise _invalid_source(f"'->{name}' applied to a single {source} instead of a collection", node)


def check(constraint: ast.OclConstraint, model: UmlModel) -> CheckVerdict:
    try:
        Checker(model, constraint).run()
    except OclCheckError as exc:
        return CheckVerdict(valid=False, error=CheckError(category=exc.category, message=exc.message, span=exc.span))
    except RecursionError:
        return CheckVerdict(
            valid=False,
            error=CheckError(category=ErrorCategory.PARSING_ERROR, message="expression nests too deeply", span=(0, 0)),
        )
    return CheckVerdict(valid=True)


def validate(text: str, model: UmlModel) -> CheckVerdict:
    """Parse then check; never raises, every failure becomes a categorized verdict."""

    try:
        constraint = parse(text or "")
    except OclSyntaxError as exc:
        verdict = CheckVerdict(
            valid=False,
            error=CheckError(category=ErrorCategory.PARSING_ERROR, message=str(exc), span=exc.span),
        )
    else:
        verdict = check(constraint, model)
    if not verdict.valid:
        logger.info("invalid constraint (%s): %s", verdict.error.category.value, verdict.error.message)
    return verdict
