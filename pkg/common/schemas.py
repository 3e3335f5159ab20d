"""Pydantic schemas shared across the pipeline stages."""
from __future__ import annotations

import re
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

from .models import BackendKind, Correctness, ErrorCategory, Metric, Technique

_MULTIPLICITY_RE = re.compile(r"^\s*(\d+|\*)\s*(?:\.\.\s*(\d+|\*)\s*)?$")

SimplePath = tuple[str, ...]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)


class Multiplicity(_Frozen):
    lower: int = Field(..., ge=0)
    upper: Optional[int] = Field(None, gt=0, description="None means unbounded (*)")

    @model_validator(mode="after")
    def _bounds(self) -> "Multiplicity":
        if self.upper is not None and self.lower > self.upper:
            raise ValueError(f"lower bound {self.lower} exceeds upper bound {self.upper}")
        return self

    @classmethod
    def parse(cls, text: str) -> "Multiplicity":
        match = _MULTIPLICITY_RE.match(text or "")
        if not match:
            raise ValueError(f"invalid multiplicity {text!r}")
        first, second = match.groups()
        if second is None:
            if first == "*":
                return cls(lower=0, upper=None)
            return cls(lower=int(first), upper=int(first))
        if first == "*":
            raise ValueError(f"invalid multiplicity {text!r}: lower bound cannot be '*'")
        return cls(lower=int(first), upper=None if second == "*" else int(second))

    @property
    def is_many(self) -> bool:
        return self.upper is None or self.upper > 1

    def __str__(self) -> str:
        upper = "*" if self.upper is None else str(self.upper)
        if self.upper is None and self.lower == 0:
            return "*"
        if str(self.lower) == upper:
            return upper
        return f"{self.lower}..{upper}"


class UmlAttribute(_Frozen):
    name: str = Field(..., min_length=1)
    type_name: str = Field(..., alias="type", min_length=1)


class UmlParameter(_Frozen):
    name: str = Field(..., min_length=1)
    type_name: str = Field(..., alias="type", min_length=1)


class UmlOperation(_Frozen):
    name: str = Field(..., min_length=1)
    params: tuple[UmlParameter, ...] = ()
    return_type_name: Optional[str] = Field(None, alias="returns")

    @model_validator(mode="after")
    def _unique_params(self) -> "UmlOperation":
        names = [param.name for param in self.params]
        if len(names) != len(set(names)):
            raise ValueError(f"operation {self.name!r} repeats a parameter name")
        return self

    @property
    def arity(self) -> int:
        return len(self.params)

    def signature(self) -> str:
        params = ", ".join(f"{param.name}: {param.type_name}" for param in self.params)
        suffix = f": {self.return_type_name}" if self.return_type_name else ""
        return f"{self.name}({params}){suffix}"


class UmlClass(_Frozen):
    name: str = Field(..., min_length=1)
    attributes: tuple[UmlAttribute, ...] = ()
    operations: tuple[UmlOperation, ...] = ()

    @model_validator(mode="after")
    def _unique_members(self) -> "UmlClass":
        attribute_names = [attribute.name for attribute in self.attributes]
        if len(attribute_names) != len(set(attribute_names)):
            raise ValueError(f"class {self.name!r} repeats an attribute name")
        signatures = [(operation.name, operation.arity) for operation in self.operations]
        if len(signatures) != len(set(signatures)):
            raise ValueError(f"class {self.name!r} repeats an operation name with the same arity")
        return self

    def attribute(self, name: str) -> Optional[UmlAttribute]:
        return next((attribute for attribute in self.attributes if attribute.name == name), None)

    def operations_named(self, name: str) -> list[UmlOperation]:
        return [operation for operation in self.operations if operation.name == name]


class UmlAssociationEnd(_Frozen):
    class_name: str = Field(..., alias="class", min_length=1)
    role: str = Field(..., min_length=1)
    multiplicity: Multiplicity
    navigable: bool = True

    @field_validator("multiplicity", mode="before")
    @classmethod
    def _parse_multiplicity(cls, value: object) -> object:
        if isinstance(value, str):
            return Multiplicity.parse(value)
        return value

    @field_serializer("multiplicity")
    def _dump_multiplicity(self, value: Multiplicity) -> str:
        return str(value)


class UmlAssociation(_Frozen):
    name: Optional[str] = None
    ends: tuple[UmlAssociationEnd, UmlAssociationEnd]


class Navigation(_Frozen):
    role: str
    target: str
    multiplicity: Multiplicity


class UmlModel(_Frozen):
    name: str = Field(..., min_length=1)
    classes: tuple[UmlClass, ...] = Field(..., min_length=1)
    associations: tuple[UmlAssociation, ...] = ()

    @model_validator(mode="after")
    def _referential_integrity(self) -> "UmlModel":
        seen: set[str] = set()
        for index, uml_class in enumerate(self.classes):
            if uml_class.name in seen:
                raise ValueError(f"classes[{index}].name: duplicate class {uml_class.name!r}")
            seen.add(uml_class.name)

        by_name = {uml_class.name: uml_class for uml_class in self.classes}
        roles_from: dict[str, set[str]] = {name: set() for name in by_name}
        for index, association in enumerate(self.associations):
            for end_index, end in enumerate(association.ends):
                if end.class_name not in by_name:
                    raise ValueError(
                        f"associations[{index}].ends[{end_index}].class: unknown class {end.class_name!r}"
                    )
            for end_index, end in enumerate(association.ends):
                source = association.ends[1 - end_index].class_name
                location = f"associations[{index}].ends[{end_index}].role"
                if by_name[source].attribute(end.role) is not None:
                    raise ValueError(f"{location}: role {end.role!r} collides with an attribute of {source!r}")
                if end.navigable:
                    if end.role in roles_from[source]:
                        raise ValueError(f"{location}: role {end.role!r} is already navigable from {source!r}")
                    roles_from[source].add(end.role)
        return self

    def class_names(self) -> list[str]:
        return [uml_class.name for uml_class in self.classes]


class SpecInput(_Frozen):
    id: str = Field(..., min_length=1)
    text: str
    context_hint: Optional[str] = None


class RankedPath(_Frozen):
    path: SimplePath
    score: float
    metric: Metric
    rank: int = Field(..., ge=1)


class PromptBundle(_Frozen):
    system_text: str
    user_text: str
    path: SimplePath
    context_json: str
    approx_tokens: int = Field(..., ge=0)
    technique: Technique = Technique.PATHOCL


class GenerationConfig(_Frozen):
    model_name: str = "gpt-4"
    temperature: float = 0.0
    max_output_tokens: int = Field(256, gt=0)
    price_per_1k_input_tokens: float = Field(0.003, ge=0.0)


class Completion(_Frozen):
    text: str
    input_tokens: int = Field(..., ge=0)
    output_tokens: int = Field(..., ge=0)
    cost_usd: float = Field(..., ge=0.0)
    backend: BackendKind
    spec_id: Optional[str] = None
    rank: Optional[int] = None
    technique: Technique = Technique.PATHOCL
    path: SimplePath = ()


class CheckError(_Frozen):
    category: ErrorCategory
    message: str
    span: tuple[int, int] = (0, 0)


class CheckVerdict(_Frozen):
    valid: bool
    error: Optional[CheckError] = None

    @model_validator(mode="after")
    def _error_iff_invalid(self) -> "CheckVerdict":
        if self.valid == (self.error is not None):
            raise ValueError("a verdict carries an error exactly when it is invalid")
        return self

    def to_json(self) -> dict[str, object]:
        return {
            "valid": self.valid,
            "category": self.error.category.value if self.error else None,
            "message": self.error.message if self.error else "",
            "span": list(self.error.span) if self.error else [0, 0],
        }


class CorrectnessVerdict(_Frozen):
    spec_id: str
    rank: int = Field(..., ge=1)
    verdict: Correctness
