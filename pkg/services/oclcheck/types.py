"""Static OCL types used by the checker."""
from __future__ import annotations

import dataclasses as d
import re
import typing as t

from common.schemas import Multiplicity, UmlModel


class OclType:
    def describe(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.describe()


@d.dataclass(frozen=True)
class ClassType(OclType):
    name: str

    def describe(self) -> str:
        return self.name


@d.dataclass(frozen=True)
class PrimitiveType(OclType):
    name: str

    def describe(self) -> str:
        return self.name


@d.dataclass(frozen=True)
class CollectionType(OclType):
    kind: str
    element: OclType

    def describe(self) -> str:
        return f"{self.kind}({self.element.describe()})"


@d.dataclass(frozen=True)
class UnknownType(OclType):
    """Types the model does not define (e.g. ``Date`` or ``Time`` datatypes); checks pass through them."""

    name: str = "?"

    def describe(self) -> str:
        return self.name


INTEGER = PrimitiveType("Integer")
REAL = PrimitiveType("Real")
BOOLEAN = PrimitiveType("Boolean")
STRING = PrimitiveType("String")
UNKNOWN = UnknownType()

_PRIMITIVES = {
    "Integer": INTEGER,
    "UnlimitedNatural": INTEGER,
    "Real": REAL,
    "Boolean": BOOLEAN,
    "String": STRING,
}
_COLLECTION_RE = re.compile(r"^(Set|Bag|Sequence|OrderedSet|Collection)\s*\((.+)\)$")


def type_from_name(name: t.Optional[str], model: UmlModel) -> OclType:
    if not name:
        return UNKNOWN
    name = name.strip()
    if name in _PRIMITIVES:
        return _PRIMITIVES[name]
    match = _COLLECTION_RE.match(name)
    if match:
        return CollectionType(match.group(1), type_from_name(match.group(2), model))
    if name in model.class_names():
        return ClassType(name)
    return UnknownType(name)


def navigation_type(target: str, multiplicity: Multiplicity) -> OclType:
    """Navigating to a many-valued end yields a Set; a single-valued end yields the class itself."""

    return CollectionType("Set", ClassType(target)) if multiplicity.is_many else ClassType(target)


def is_unknown(oclt: OclType) -> bool:
    return isinstance(oclt, UnknownType)


def is_boolean(oclt: OclType) -> bool:
    return oclt == BOOLEAN or is_unknown(oclt)


def is_numeric(oclt: OclType) -> bool:
    return oclt in (INTEGER, REAL) or is_unknown(oclt)


def is_collection(oclt: OclType) -> bool:
    return isinstance(oclt, CollectionType)


def numeric_result(left: OclType, right: OclType) -> OclType:
    if is_unknown(left) or is_unknown(right):
        return REAL if REAL in (left, right) else UNKNOWN
    return INTEGER if left == right == INTEGER else REAL


def common_type(left: OclType, right: OclType) -> OclType:
    if left == right:
        return left
    if {left, right} == {INTEGER, REAL}:
        return REAL
    return UNKNOWN


def flatten(oclt: OclType) -> OclType:
    """Element type after collection flattening (``collect`` over collection-valued bodies)."""

    while isinstance(oclt, CollectionType):
        oclt = oclt.element
    return oclt


def names_match(actual: OclType, declared: str) -> bool:
    """Textual type-name comparison; types the model leaves undefined match anything."""

    if is_unknown(actual):
        return True
    declared = declared.strip()
    if declared == "UnlimitedNatural":
        declared = "Integer"
    return re.sub(r"\s+", "", actual.describe()) == re.sub(r"\s+", "", declared)
