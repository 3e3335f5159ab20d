"""Specification preprocessing and UML-element extraction."""
from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

from pydantic import ValidationError

from common.errors import DataError
from common.logging_setup import get_stage_logger
from common.models import PosTag
from common.schemas import SpecInput

from .tagger import LexiconTagger, Tagger, noun_lemma

logger = get_stage_logger("nlp")

_WORD_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*(?:'[A-Za-z]+)?(?:-[A-Za-z0-9_]+)*|\d+(?:[.,]\d+)*")
_NEGATIONS = {"can't": "can", "won't": "will", "shan't": "shall"}

UmlElementSet = frozenset[str]

_default_tagger = LexiconTagger()


class Token(NamedTuple):
    surface: str
    lemma: str
    pos: PosTag


def _words(text: str) -> list[str]:
    words: list[str] = []
    for raw in _WORD_RE.findall(text):
        lowered = raw.lower()
        if lowered in _NEGATIONS or lowered.endswith("n't"):
            words += [raw[:-3] if lowered not in _NEGATIONS else _NEGATIONS[lowered], "not"]
        elif "'" in raw:
            # possessive or clitic: keep the head word
            words.append(raw.split("'", 1)[0])
        else:
            words.append(raw)
    return [word for word in words if word]


def preprocess(spec_text: str, tagger: Optional[Tagger] = None) -> list[Token]:
    """Tokenize, tag and lemmatize an English specification."""

    if not spec_text or not spec_text.strip():
        raise DataError("specification text is empty")
    words = _words(spec_text)
    tagged = (tagger or _default_tagger).tag(words)
    return [Token(surface=word, lemma=lemma.lower(), pos=pos) for word, (pos, lemma) in zip(words, tagged) if lemma]


def extract_uml_elements(tokens: Iterable[Token]) -> UmlElementSet:
    """Lemmas of every noun and adjective, deduplicated."""

    elements = frozenset(token.lemma.lower() for token in tokens if token.pos in (PosTag.NOUN, PosTag.ADJ) and token.lemma)
    if not elements:
        logger.warning("no nouns or adjectives found; ranking will score every path as 0")
    return elements


def normalize_name(identifier: str) -> str:
    """Normalize a UML identifier (class, attribute, operation, role) for matching."""

    return noun_lemma(identifier)


def load_specs(path: str | Path) -> list[SpecInput]:
    """Read a JSON-lines specification file."""

    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read specification file: {exc.strerror or exc}", location=str(path)) from exc

    specs: list[SpecInput] = []
    seen: set[str] = set()
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        location = f"{path}:{number}"
        try:
            spec = SpecInput.model_validate(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed JSON: {exc.msg}", location=location) from exc
        except ValidationError as exc:
            raise DataError(str(exc.errors()[0]["msg"]), location=location) from exc
        if spec.id in seen:
            raise DataError(f"duplicate specification id {spec.id!r}", location=location)
        seen.add(spec.id)
        specs.append(spec)
    return specs
