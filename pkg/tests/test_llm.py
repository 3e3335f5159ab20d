import json

import httpx
import pytest

from common.config import Settings
from common.errors import BackendError, DataError, ReplayMissError, UsageError
from common.models import BackendKind, Metric, Technique
from common.schemas import Completion, GenerationConfig
from services.llm.client import (
    LiveBackend,
    ReplayBackend,
    RunLog,
    config_from_settings,
    generate,
    generate_many,
    load_run_log,
    strip_fences,
)
from services.llm.costs import cost_report
from services.llm.replay import ReplayEntry, ReplayStore, SeedLine, compile_replay_seed, load_seed, prompt_hash
from services.nlp.preprocess import extract_uml_elements, preprocess
from services.pathgen.graph import build_graph, enumerate_simple_paths
from services.prompt.builder import craft_augmentation_prompt, craft_prompt
from services.rank.similarity import rank_paths

AIRPORT_SPEC = "The maximum number of passengers on any flight may not exceed 1000."
CFG = GenerationConfig(model_name="gpt-4", price_per_1k_input_tokens=0.003)


def live_settings(**overrides) -> Settings:
    values = {
        "llm_endpoint_url": "https://chat.local/v1",
        "llm_api_key": "test-key",
        "retry_backoff_base": 0.0,
        "llm_rate_limit": "1000/second",
    }
    values.update(overrides)
    return Settings(**values)


def chat_response(text: str, prompt_tokens: int = 120, completion_tokens: int = 9) -> httpx.Response:
    return httpx.Response(
        200,
        json={
            "choices": [{"message": {"role": "assistant", "content": text}}],
            "usage": {"prompt_tokens": prompt_tokens, "completion_tokens": completion_tokens},
        },
    )


def scripted_client(responses: list, seen: list) -> httpx.Client:
    def handler(request: httpx.Request) -> httpx.Response:
        seen.append(request)
        outcome = responses.pop(0)
        if isinstance(outcome, Exception):
            raise outcome
        return outcome

    return httpx.Client(transport=httpx.MockTransport(handler))


def completion(rank, input_tokens, cost, technique=Technique.PATHOCL) -> Completion:
    return Completion(
        text="context A inv: true",
        input_tokens=input_tokens,
        output_tokens=5,
        cost_usd=cost,
        backend=BackendKind.REPLAY,
        spec_id="s1",
        rank=rank,
        technique=technique,
    )


@pytest.mark.parametrize(
    ("raw", "expected"),
    [
        ("```ocl\ncontext A inv: true\n```", "context A inv: true"),
        ("```\ncontext A inv: true\n```", "context A inv: true"),
        ("  context A inv: true \n", "context A inv: true"),
        ("no fence here", "no fence here"),
    ],
)
def test_strip_fences(raw, expected):
    assert strip_fences(raw) == expected


def test_replay_seed_resolves_ranks(airport_model, airport_specs, airport_replay):
    top1 = craft_prompt(airport_model, ("Flight", "Person"), AIRPORT_SPEC)
    entry = airport_replay.lookup(top1)
    assert entry.text == "context Flight inv: self.passengers->size() <= 1000"
    assert entry.input_tokens == top1.approx_tokens
    assert entry.output_tokens == 14
    assert len(airport_replay) == 12


def test_replay_seed_augmentation_line(airport_model, airport_replay):
    bundle = craft_augmentation_prompt(airport_model, "Every airline must have a non-empty name.")
    assert airport_replay.lookup(bundle).text == "context Airline inv: self.name->notEmpty()"


def test_replay_miss(airport_model, airport_replay):
    bundle = craft_prompt(airport_model, ("Person",), AIRPORT_SPEC)
    with pytest.raises(ReplayMissError) as excinfo:
        ReplayBackend(airport_replay).complete(bundle, CFG)
    assert excinfo.value.prompt_hash == prompt_hash(bundle)
    assert excinfo.value.exit_code == 3


def test_replay_store_save_and_load(tmp_path, airport_model, airport_replay):
    path = tmp_path / "fixture.json"
    airport_replay.save(path)
    reloaded = ReplayStore.load(path)
    assert len(reloaded) == len(airport_replay)
    assert reloaded.to_json() == airport_replay.to_json()
    keys = list(json.loads(path.read_text(encoding="utf-8")))
    assert keys == sorted(keys)


def test_replay_store_rejects_bad_fixture(tmp_path):
    path = tmp_path / "fixture.json"
    path.write_text("[]", encoding="utf-8")
    with pytest.raises(DataError, match="keyed by prompt hash"):
        ReplayStore.load(path)


def test_seed_line_needs_path_or_rank():
    with pytest.raises(ValueError, match="needs a path or a rank"):
        SeedLine(spec_id="a1", text="context Flight inv: true")


def test_seed_rank_out_of_range(airport_model, airport_specs):
    seed = [SeedLine(spec_id="a1", rank=999, text="context Flight inv: true")]
    with pytest.raises(DataError, match="rank 999"):
        compile_replay_seed(airport_model, airport_specs, seed)


def test_seed_unknown_spec(airport_model, airport_specs):
    seed = [SeedLine(spec_id="zz", path=("Flight",), text="context Flight inv: true")]
    with pytest.raises(DataError, match="unknown specification"):
        compile_replay_seed(airport_model, airport_specs, seed)


def test_load_seed_reports_line(tmp_path):
    path = tmp_path / "bad.seed.jsonl"
    path.write_text('{"spec_id": "a1", "rank": 1, "text": "x"}\n{"spec_id": "a1"}\n', encoding="utf-8")
    with pytest.raises(DataError, match=r"bad\.seed\.jsonl:2"):
        load_seed(path)


def test_generate_computes_cost(airport_model):
    bundle = craft_prompt(airport_model, ("Flight",), AIRPORT_SPEC)
    store = ReplayStore()
    store.record(bundle, ReplayEntry(text="```ocl\ncontext Flight inv: true\n```", input_tokens=2000, output_tokens=7))
    result = generate(bundle, CFG, ReplayBackend(store), spec_id="a1", rank=1)
    assert result.text == "context Flight inv: true"
    assert result.cost_usd == pytest.approx(0.006)
    assert result.backend is BackendKind.REPLAY
    assert result.path == ("Flight",)


def test_generate_many_keeps_order(tmp_path, airport_model, airport_specs, airport_replay):
    paths = enumerate_simple_paths(build_graph(airport_model))
    jobs = []
    for spec in airport_specs:
        elements = extract_uml_elements(preprocess(spec.text))
        for ranked in rank_paths(airport_model, paths, elements, Metric.JACCARD, 3):
            jobs.append((craft_prompt(airport_model, ranked.path, spec.text), spec.id, ranked.rank))

    log = RunLog(tmp_path / "completions.jsonl")
    results = generate_many(jobs, CFG, ReplayBackend(airport_replay), max_in_flight=4, run_log=log)
    assert [(item.spec_id, item.rank) for item in results] == [(spec_id, rank) for _, spec_id, rank in jobs]
    assert results[0].text == "context Flight inv: self.passengers->size() <= 1000"
    # the fenced answer comes back without its fence
    assert results[5].text == "context Flight inv: self.origin->forAll(a | a.name <> '')"
    assert load_run_log(log.path) == results


def test_load_run_log_rejects_garbage(tmp_path):
    path = tmp_path / "completions.jsonl"
    path.write_text("{not json}\n", encoding="utf-8")
    with pytest.raises(DataError, match="completions.jsonl:1"):
        load_run_log(path)


def test_live_backend_needs_credentials():
    with pytest.raises(UsageError):
        LiveBackend(Settings(llm_endpoint_url=None, llm_api_key=None))


def test_live_backend_posts_chat_request(airport_model):
    seen: list = []
    recorder = ReplayStore()
    client = scripted_client([chat_response("```\ncontext Flight inv: true\n```")], seen)
    backend = LiveBackend(live_settings(), client=client, recorder=recorder)
    bundle = craft_prompt(airport_model, ("Flight",), AIRPORT_SPEC)

    result = generate(bundle, config_from_settings(live_settings()), backend, spec_id="a1", rank=1)

    assert str(seen[0].url) == "https://chat.local/v1/chat/completions"
    body = json.loads(seen[0].content)
    assert body["model"] == "gpt-4"
    assert body["temperature"] == 0.0
    assert [message["role"] for message in body["messages"]] == ["system", "user"]
    assert body["messages"][1]["content"] == bundle.user_text
    assert result.text == "context Flight inv: true"
    assert result.input_tokens == 120
    assert result.backend is BackendKind.LIVE
    assert recorder.lookup(bundle).output_tokens == 9


def test_live_backend_retries_transient_failures(airport_model):
    seen: list = []
    delays: list = []
    responses = [
        httpx.Response(429),
        httpx.ConnectError("connection refused"),
        httpx.Response(503),
        chat_response("context Flight inv: true"),
    ]
    backend = LiveBackend(
        live_settings(retry_backoff_base=0.5), client=scripted_client(responses, seen), sleep=delays.append
    )
    entry = backend.complete(craft_prompt(airport_model, ("Flight",), AIRPORT_SPEC), CFG)
    assert entry.text == "context Flight inv: true"
    assert len(seen) == 4
    assert delays == [0.5, 1.0, 2.0]


def test_live_backend_gives_up_after_attempts(airport_model):
    responses = [httpx.Response(500) for _ in range(3)]
    backend = LiveBackend(live_settings(retry_attempts=3), client=scripted_client(responses, []), sleep=lambda _: None)
    with pytest.raises(BackendError, match="after 3 attempts"):
        backend.complete(craft_prompt(airport_model, ("Flight",), AIRPORT_SPEC), CFG)


def test_live_backend_auth_failure_is_not_retried(airport_model):
    seen: list = []
    backend = LiveBackend(live_settings(), client=scripted_client([httpx.Response(401)], seen))
    with pytest.raises(BackendError, match="rejected the credential"):
        backend.complete(craft_prompt(airport_model, ("Flight",), AIRPORT_SPEC), CFG)
    assert len(seen) == 1


def test_live_backend_circuit_opens(airport_model):
    seen: list = []
    responses = [httpx.Response(500) for _ in range(5)]
    backend = LiveBackend(
        live_settings(retry_attempts=1, circuit_failure_threshold=2),
        client=scripted_client(responses, seen),
    )
    bundle = craft_prompt(airport_model, ("Flight",), AIRPORT_SPEC)
    for _ in range(2):
        with pytest.raises(BackendError, match="after 1 attempts"):
            backend.complete(bundle, CFG)
    with pytest.raises(BackendError, match="unavailable"):
        backend.complete(bundle, CFG)
    assert len(seen) == 2


def test_live_backend_bad_response_shape(airport_model):
    backend = LiveBackend(live_settings(), client=scripted_client([httpx.Response(200, json={"choices": []})], []))
    with pytest.raises(BackendError, match="unexpected chat response"):
        backend.complete(craft_prompt(airport_model, ("Flight",), AIRPORT_SPEC), CFG)


def test_cost_report():
    completions = [
        completion(1, 1000, 0.003),
        completion(2, 2000, 0.006),
        completion(1, 3000, 0.009),
        completion(None, 4000, 0.012, Technique.UML_AUGMENTATION),
    ]
    summary = cost_report(completions)
    assert summary.count == 4
    assert summary.total_cost_usd == pytest.approx(0.03)
    assert summary.mean_input_tokens == 2500
    assert summary.per_rank[1].count == 3
    assert summary.per_rank[2].mean_input_tokens == 2000
    assert summary.cumulative_by_k == pytest.approx({1: 0.024, 2: 0.03})


def test_cost_report_empty():
    summary = cost_report([])
    assert summary.count == 0
    assert summary.total_cost_usd == 0.0
    assert summary.per_rank == {}
