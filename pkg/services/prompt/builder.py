"""System/user prompt construction with a JSON class-subset context."""
from __future__ import annotations

import json
import math
from typing import Any, Iterable, Optional

from common.config import get_settings
from common.errors import DataError
from common.logging_setup import get_stage_logger
from common.models import Technique
from common.schemas import PromptBundle, SimplePath, UmlModel
from services.model.loader import class_of, navigations_of

logger = get_stage_logger("prompt")

TEMPLATE_VERSION = "pathocl-templates/1"

SYSTEM_TEMPLATE = (
    "You are an expert in UML modeling and the Object Constraint Language (OCL). "
    "Given an English specification and a set of UML classes, write exactly one OCL constraint. "
    "Output only the OCL constraint."
)

USER_TEMPLATE = "English specification:\n{spec}\n\nUML classes (JSON):\n{context}\n"

try:  # pragma: no cover - optional dependency
    import tiktoken
except Exception:  # pragma: no cover - exercised when the extra is absent
    tiktoken = None


def estimate_tokens(text: str, estimator: Optional[str] = None) -> int:
    """ceil(chars / 4), or a cl100k_base count when tiktoken is selected and installed."""

    estimator = estimator or get_settings().token_estimator
    if estimator == "tiktoken" and tiktoken is not None:
        return len(tiktoken.get_encoding("cl100k_base").encode(text))
    return math.ceil(len(text) / 4)


def _class_context(model: UmlModel, class_name: str, visible: set[str]) -> dict[str, Any]:
    uml_class = class_of(model, class_name)
    if uml_class is None:
        raise DataError(f"unknown class {class_name!r}", location=model.name)
    return {
        "name": uml_class.name,
        "attributes": [{"name": attribute.name, "type": attribute.type_name} for attribute in uml_class.attributes],
        "operations": [operation.signature() for operation in uml_class.operations],
        "roles": [
            {"role": navigation.role, "target": navigation.target, "multiplicity": str(navigation.multiplicity)}
            for navigation in navigations_of(model, class_name)
            if navigation.target in visible
        ],
    }


def context_json(model: UmlModel, class_names: Iterable[str]) -> str:
    """Canonical JSON of the given classes; roles leading outside the subset are dropped."""

    ordered = list(dict.fromkeys(class_names))
    visible = set(ordered)
    document = {"classes": [_class_context(model, name, visible) for name in ordered]}
    return json.dumps(document, indent=2, ensure_ascii=False)


def _bundle(spec_text: str, path: SimplePath, context: str, technique: Technique) -> PromptBundle:
    if not spec_text or not spec_text.strip():
        raise DataError("specification text is empty")
    user_text = USER_TEMPLATE.format(spec=spec_text.strip(), context=context)
    return PromptBundle(
        system_text=SYSTEM_TEMPLATE,
        user_text=user_text,
        path=path,
        context_json=context,
        approx_tokens=estimate_tokens(SYSTEM_TEMPLATE + user_text),
        technique=technique,
    )


def craft_prompt(model: UmlModel, path: SimplePath, spec_text: str) -> PromptBundle:
    """PathOCL prompt: only the classes of ``path`` in the context."""

    return _bundle(spec_text, tuple(path), context_json(model, path), Technique.PATHOCL)


def craft_augmentation_prompt(model: UmlModel, spec_text: str) -> PromptBundle:
    """UML-Augmentation baseline: the whole class model in the context."""

    names = model.class_names()
    return _bundle(spec_text, (), context_json(model, names), Technique.UML_AUGMENTATION)


def prompt_record(spec_id: str, rank: int, bundle: PromptBundle) -> dict[str, Any]:
    return {
        "spec_id": spec_id,
        "rank": rank,
        "system": bundle.system_text,
        "user": bundle.user_text,
        "approx_tokens": bundle.approx_tokens,
    }
