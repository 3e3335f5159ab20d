import os
import tempfile
from pathlib import Path
from typing import Generator

import pytest

_LOG_DIR = tempfile.mkdtemp(prefix="pathocl-logs-")
os.environ.setdefault("LOG_DIR", _LOG_DIR)
os.environ.setdefault("EMBEDDING_CACHE_URL", f"sqlite:///{_LOG_DIR}/embedding_cache.db")

from common.config import apply_overrides, reset_settings_cache  # noqa: E402

reset_settings_cache()

from common.schemas import SpecInput, UmlModel  # noqa: E402
from services.llm.replay import ReplayStore, compile_replay_seed, load_seed  # noqa: E402
from services.model.loader import load_model  # noqa: E402
from services.nlp.preprocess import load_specs  # noqa: E402

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(autouse=True)
def _clean_settings() -> Generator[None, None, None]:
    apply_overrides({})
    yield
    apply_overrides({})


@pytest.fixture()
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture()
def airport_model() -> UmlModel:
    return load_model(FIXTURES / "airport.model.json")


@pytest.fixture()
def royal_model() -> UmlModel:
    return load_model(FIXTURES / "royal_loyal.model.json")


@pytest.fixture()
def airport_specs() -> list[SpecInput]:
    return load_specs(FIXTURES / "airport.specs.jsonl")


@pytest.fixture()
def royal_specs() -> list[SpecInput]:
    return load_specs(FIXTURES / "royal_loyal.specs.jsonl")


@pytest.fixture()
def airport_replay(airport_model, airport_specs) -> ReplayStore:
    return compile_replay_seed(airport_model, airport_specs, load_seed(FIXTURES / "airport.seed.jsonl"))


@pytest.fixture()
def royal_replay(royal_model, royal_specs) -> ReplayStore:
    return compile_replay_seed(royal_model, royal_specs, load_seed(FIXTURES / "royal_loyal.seed.jsonl"))
