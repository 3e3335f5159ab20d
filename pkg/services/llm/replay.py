"""Content-addressed replay fixtures and the seed format that produces them."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from threading import Lock
from typing import Iterable, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from common.config import get_settings
from common.errors import DataError, ReplayMissError
from common.models import Metric, Technique
from common.schemas import PromptBundle, RankedPath, SpecInput, UmlModel
from services.nlp.preprocess import extract_uml_elements, preprocess
from services.pathgen.graph import build_graph, default_max_len, enumerate_simple_paths
from services.prompt.builder import craft_augmentation_prompt, craft_prompt, estimate_tokens
from services.rank.similarity import rank_paths


class ReplayEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    text: str
    input_tokens: int = Field(..., ge=0)
    output_tokens: int = Field(..., ge=0)


class SeedLine(BaseModel):
    """One human-written canned answer: which spec, which prompt, what the model said.

    A PathOCL line names its path directly or by ``rank`` under ``metric``.
    """

    model_config = ConfigDict(frozen=True)

    spec_id: str
    technique: Technique = Technique.PATHOCL
    path: tuple[str, ...] = ()
    rank: Optional[int] = Field(None, ge=1)
    metric: Metric = Metric.JACCARD
    text: str
    output_tokens: Optional[int] = None

    @model_validator(mode="after")
    def _names_a_prompt(self) -> "SeedLine":
        if self.technique is Technique.PATHOCL and not self.path and self.rank is None:
            raise ValueError(f"seed line for {self.spec_id!r} needs a path or a rank")
        return self


def prompt_hash(bundle: PromptBundle) -> str:
    return hashlib.sha256(f"{bundle.system_text}\u0000{bundle.user_text}".encode("utf-8")).hexdigest()


class ReplayStore:
    """Thread-safe hash -> entry mapping, loadable from and savable to JSON."""

    def __init__(self, entries: Optional[Mapping[str, ReplayEntry]] = None) -> None:
        self._entries: dict[str, ReplayEntry] = dict(entries or {})
        self._lock = Lock()

    @classmethod
    def load(cls, path: str | Path) -> "ReplayStore":
        path = Path(path)
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataError(f"cannot read replay fixture: {exc.strerror or exc}", location=str(path)) from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed JSON: {exc.msg}", location=f"{path}:{exc.lineno}") from exc
        if not isinstance(document, dict):
            raise DataError("replay fixture must be a JSON object keyed by prompt hash", location=str(path))
        try:
            entries = {key: ReplayEntry.model_validate(value) for key, value in document.items()}
        except ValidationError as exc:
            raise DataError(str(exc.errors()[0]["msg"]), location=str(path)) from exc
        return cls(entries)

    def lookup(self, bundle: PromptBundle) -> ReplayEntry:
        key = prompt_hash(bundle)
        with self._lock:
            entry = self._entries.get(key)
        if entry is None:
            raise ReplayMissError(key)
        return entry

    def record(self, bundle: PromptBundle, entry: ReplayEntry) -> None:
        with self._lock:
            self._entries[prompt_hash(bundle)] = entry

    def update(self, other: "ReplayStore") -> None:
        with other._lock:
            entries = dict(other._entries)
        with self._lock:
            self._entries.update(entries)

    def to_json(self) -> str:
        with self._lock:
            document = {key: self._entries[key].model_dump() for key in sorted(self._entries)}
        return json.dumps(document, indent=2, ensure_ascii=False) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


def load_seed(path: str | Path) -> list[SeedLine]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read replay seed: {exc.strerror or exc}", location=str(path)) from exc
    seed: list[SeedLine] = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            seed.append(SeedLine.model_validate_json(line))
        except ValidationError as exc:
            raise DataError(str(exc.errors()[0]["msg"]), location=f"{path}:{number}") from exc
    return seed


def compile_replay_seed(model: UmlModel, specs: Iterable[SpecInput], seed: Iterable[SeedLine]) -> ReplayStore:
    """Craft the exact prompt each seed line refers to and key its answer by hash.

    Ranked lines are resolved with the default path bound and the bundled embedder.
    """

    by_id = {spec.id: spec for spec in specs}
    store = ReplayStore()
    paths: Optional[list[tuple[str, ...]]] = None
    rankings: dict[tuple[str, Metric], list[RankedPath]] = {}
    for line in seed:
        spec = by_id.get(line.spec_id)
        if spec is None:
            raise DataError(f"seed refers to unknown specification {line.spec_id!r}", location=model.name)
        if line.technique is Technique.UML_AUGMENTATION:
            bundle = craft_augmentation_prompt(model, spec.text)
        elif line.path:
            bundle = craft_prompt(model, line.path, spec.text)
        else:
            if paths is None:
                graph = build_graph(model)
                paths = enumerate_simple_paths(graph, default_max_len(graph), get_settings().path_cap)
            key = (spec.id, line.metric)
            if key not in rankings:
                elements = extract_uml_elements(preprocess(spec.text))
                rankings[key] = rank_paths(model, paths, elements, line.metric, len(paths))
            ranked = rankings[key]
            if line.rank > len(ranked):
                raise DataError(f"seed asks for rank {line.rank} of {spec.id!r}; only {len(ranked)} paths exist")
            bundle = craft_prompt(model, ranked[line.rank - 1].path, spec.text)
        output_tokens = line.output_tokens if line.output_tokens is not None else estimate_tokens(line.text, "heuristic")
        store.record(bundle, ReplayEntry(text=line.text, input_tokens=bundle.approx_tokens, output_tokens=output_tokens))
    return store
