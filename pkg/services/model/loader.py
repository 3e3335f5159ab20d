"""Loading, serializing and querying UML class models."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from common.errors import DataError
from common.models import SizeCategory
from common.schemas import Navigation, UmlClass, UmlModel


def _format_loc(loc: tuple[object, ...]) -> str:
    parts: list[str] = []
    for item in loc:
        if isinstance(item, int):
            parts.append(f"[{item}]")
        else:
            parts.append(f".{item}" if parts else str(item))
    return "".join(parts) or "<root>"


def _first_error(exc: ValidationError, source: str) -> DataError:
    error = exc.errors()[0]
    message = str(error.get("msg", "invalid value")).removeprefix("Value error, ")
    location = _format_loc(tuple(error.get("loc", ())))
    if location == "<root>" and ": " in message:
        # model-level invariants carry their own location prefix
        location, message = message.split(": ", 1)
    return DataError(message, location=f"{source}:{location}")


def parse_model(document: object, source: str = "<memory>") -> UmlModel:
    """Validate an already-decoded model document."""

    try:
        return UmlModel.model_validate(document)
    except ValidationError as exc:
        raise _first_error(exc, source) from exc


def load_model(path: str | Path) -> UmlModel:
    """Read and fully validate a model file (JSON, UTF-8)."""

    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read model file: {exc.strerror or exc}", location=str(path)) from exc
    try:
        document = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed JSON: {exc.msg}", location=f"{path}:{exc.lineno}:{exc.colno}") from exc
    return parse_model(document, source=str(path))


def canonical(model: UmlModel) -> UmlModel:
    """Return the model with classes and associations in a fixed order."""

    def association_key(association) -> tuple:
        return tuple((end.class_name, end.role) for end in association.ends)

    return model.model_copy(
        update={
            "classes": tuple(sorted(model.classes, key=lambda uml_class: uml_class.name)),
            "associations": tuple(sorted(model.associations, key=association_key)),
        }
    )


def dump_model(model: UmlModel) -> str:
    """Serialize to the model file format, canonically ordered."""

    document = canonical(model).model_dump(mode="json", by_alias=True)
    return json.dumps(document, indent=2, ensure_ascii=False) + "\n"


def class_of(model: UmlModel, name: str) -> Optional[UmlClass]:
    return next((uml_class for uml_class in model.classes if uml_class.name == name), None)


def navigations_of(model: UmlModel, class_name: str) -> list[Navigation]:
    """Roles reachable from ``class_name``, one per navigable opposite end.

    A self-association contributes both of its ends.
    """
    if class_of(model, class_name) is None:
        raise DataError(f"unknown class {class_name!r}", location=model.name)
    navigations: list[Navigation] = []
    for association in model.associations:
        for index, end in enumerate(association.ends):
            opposite = association.ends[1 - index]
            if opposite.class_name == class_name and end.navigable:
                navigations.append(Navigation(role=end.role, target=end.class_name, multiplicity=end.multiplicity))
    return navigations


def size_category(model: UmlModel) -> SizeCategory:
    count = len(model.classes)
    if count <= 5:
        return SizeCategory.SMALL
    if count <= 9:
        return SizeCategory.MEDIUM
    return SizeCategory.LARGE
