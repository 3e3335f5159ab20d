import json

import httpx
import numpy as np
import pytest

from common.config import apply_overrides, get_settings
from common.errors import BackendError, DataError, UsageError
from common.models import EmbedderKind, Metric
from services.nlp.preprocess import extract_uml_elements, preprocess
from services.pathgen.graph import build_graph, enumerate_simple_paths
from services.rank.embedders import HashingEmbedder, PrecomputedEmbedder, RemoteEmbedder, build_embedder
from services.rank.similarity import cosine_score, jaccard, property_set, rank_paths, score_path

AIRPORT_ELEMENTS = frozenset({"number", "passenger", "flight", "maximum"})


def airport_paths(model):
    return enumerate_simple_paths(build_graph(model))


def embeddings_transport(calls: list):
    def handler(request: httpx.Request) -> httpx.Response:
        payload = request.read().decode()
        calls.append(payload)
        terms = json.loads(payload)["input"]
        data = [{"index": index, "embedding": [float(len(term)), 1.0, float(index + 1)]} for index, term in enumerate(terms)]
        return httpx.Response(200, json={"data": data})

    return httpx.MockTransport(handler)


def test_property_set_of_airline_flight(airport_model):
    properties = property_set(airport_model, ("Airline", "Flight")).properties
    assert properties == {"airline", "name", "flight", "departtime", "arrivaltime", "duration", "maxnrpassenger"}


def test_property_set_takes_role_at_the_far_end_of_each_hop(airport_model):
    outbound = property_set(airport_model, ("Airport", "Flight")).properties
    inbound = property_set(airport_model, ("Flight", "Airport")).properties
    assert outbound - inbound == {"arrivingflight", "departingflight"}
    assert inbound - outbound == {"destination", "origin"}


def test_property_set_rejects_unknown_hop(airport_model):
    with pytest.raises(DataError, match="no navigable association"):
        property_set(airport_model, ("Airport", "Person"))
    with pytest.raises(DataError, match="unknown class"):
        property_set(airport_model, ("Plane",))


def test_jaccard_of_airline_flight(airport_model):
    candidate = property_set(airport_model, ("Airline", "Flight"))
    assert score_path(candidate, AIRPORT_ELEMENTS, Metric.JACCARD) == pytest.approx(0.1)


def test_jaccard_edge_cases():
    assert jaccard(frozenset(), frozenset()) == 0.0
    assert jaccard({"a"}, {"a"}) == 1.0
    assert jaccard({"a", "b"}, {"c"}) == 0.0


def test_airport_ranking_top1(airport_model):
    elements = extract_uml_elements(preprocess("The maximum number of passengers on any flight may not exceed 1000."))
    ranked = rank_paths(airport_model, airport_paths(airport_model), elements, Metric.JACCARD, 5)
    assert ranked[0].path == ("Flight", "Person")
    assert ranked[0].score == pytest.approx(2 / 11)
    assert [item.rank for item in ranked] == [1, 2, 3, 4, 5]
    scores = [item.score for item in ranked]
    assert scores == sorted(scores, reverse=True)


def test_ranking_ties_follow_path_order(airport_model):
    ranked = rank_paths(airport_model, airport_paths(airport_model), frozenset(), Metric.JACCARD, 3)
    assert [item.path for item in ranked] == [("Airline",), ("Airport",), ("Flight",)]
    assert {item.score for item in ranked} == {0.0}


def test_k_larger_than_paths(airport_model):
    paths = [("Airline",), ("Airline", "Flight")]
    ranked = rank_paths(airport_model, paths, AIRPORT_ELEMENTS, Metric.JACCARD, 10)
    assert len(ranked) == 2


def test_invalid_k(airport_model):
    with pytest.raises(UsageError):
        rank_paths(airport_model, airport_paths(airport_model), AIRPORT_ELEMENTS, Metric.JACCARD, 0)


def test_no_paths(airport_model):
    with pytest.raises(DataError, match="no paths"):
        rank_paths(airport_model, [], AIRPORT_ELEMENTS, Metric.JACCARD, 1)


def test_cosine_bounds_and_determinism(airport_model):
    first = rank_paths(airport_model, airport_paths(airport_model), AIRPORT_ELEMENTS, Metric.COSINE, 10)
    second = rank_paths(airport_model, airport_paths(airport_model), AIRPORT_ELEMENTS, Metric.COSINE, 10)
    assert first == second
    assert all(0.0 <= item.score <= 1.0 for item in first)
    assert all(item.metric is Metric.COSINE for item in first)


def test_cosine_identical_sets_with_orthogonal_terms():
    vectors = {"a": np.array([1.0, 0.0]), "b": np.array([0.0, 1.0])}
    embedder = PrecomputedEmbedder("axes", vectors)
    assert cosine_score({"a"}, {"a"}, embedder) == pytest.approx(1.0)
    assert cosine_score({"a"}, {"b"}, embedder) == pytest.approx(0.0)
    assert cosine_score({"a", "b"}, {"a", "b"}, embedder) == pytest.approx(0.5)


def test_cosine_is_scale_invariant(airport_model):
    candidate = property_set(airport_model, ("Flight", "Person"))
    rng = np.random.default_rng(3)
    terms = sorted(AIRPORT_ELEMENTS | candidate.properties)
    vectors = {term: rng.normal(size=8) for term in terms}
    plain = PrecomputedEmbedder("plain", vectors)
    scaled = PrecomputedEmbedder("scaled", {term: vector * 7.5 for term, vector in vectors.items()})
    assert score_path(candidate, AIRPORT_ELEMENTS, Metric.COSINE, plain) == pytest.approx(
        score_path(candidate, AIRPORT_ELEMENTS, Metric.COSINE, scaled)
    )


def test_cosine_empty_elements_is_zero():
    assert cosine_score(frozenset(), {"flight"}, HashingEmbedder()) == 0.0


def test_hashing_embedder_is_unit_length():
    vector = HashingEmbedder().embed("passenger")
    assert np.linalg.norm(vector) == pytest.approx(1.0)
    assert (vector >= 0).all()
    assert HashingEmbedder().embed("Passenger") == pytest.approx(vector)


def test_build_embedder_defaults_to_bundled():
    assert isinstance(build_embedder(get_settings()), HashingEmbedder)


def test_build_remote_embedder_needs_endpoint():
    with pytest.raises(UsageError):
        build_embedder(get_settings(), EmbedderKind.REMOTE)


def test_build_remote_embedder_from_settings():
    settings = apply_overrides({"embedding_endpoint_url": "http://embed.local/v1"})
    embedder = build_embedder(settings, EmbedderKind.REMOTE)
    assert isinstance(embedder, RemoteEmbedder)
    assert embedder.name.startswith("remote:")


def test_remote_embedder_caches_on_disk(tmp_path):
    calls: list = []
    cache_url = f"sqlite:///{tmp_path}/vectors.db"
    client = httpx.Client(transport=embeddings_transport(calls))
    first = RemoteEmbedder("http://embed.local/v1", "mini", cache_url, client=client)
    vectors = first.embed_many(["flight", "passenger"])
    assert vectors.shape == (2, 3)
    assert np.linalg.norm(vectors, axis=1) == pytest.approx([1.0, 1.0])
    first.embed_many(["flight"])
    assert len(calls) == 1

    second = RemoteEmbedder("http://embed.local/v1", "mini", cache_url, client=client)
    assert second.embed("passenger") == pytest.approx(vectors[1])
    assert len(calls) == 1


def test_remote_embedder_errors(tmp_path):
    client = httpx.Client(transport=httpx.MockTransport(lambda request: httpx.Response(500)))
    embedder = RemoteEmbedder("http://embed.local/v1", "mini", f"sqlite:///{tmp_path}/v.db", client=client)
    with pytest.raises(BackendError, match="embedding request failed"):
        embedder.embed("flight")


def test_cosine_argmax_is_scale_invariant_on_random_sets():
    rng = np.random.default_rng(20240917)
    vocabulary = [f"term{index}" for index in range(12)]
    vectors = {term: rng.normal(size=6) for term in vocabulary}
    plain = PrecomputedEmbedder("plain", vectors)
    for _ in range(1000):
        factors = {term: rng.uniform(0.1, 10.0) for term in vocabulary}
        scaled = PrecomputedEmbedder("scaled", {term: vectors[term] * factors[term] for term in vocabulary})
        elements = set(rng.choice(vocabulary, size=rng.integers(1, 5), replace=False))
        candidates = [set(rng.choice(vocabulary, size=rng.integers(1, 6), replace=False)) for _ in range(3)]
        before = [cosine_score(elements, candidate, plain) for candidate in candidates]
        after = [cosine_score(elements, candidate, scaled) for candidate in candidates]
        assert all(-1.0 <= score <= 1.0 for score in before)
        assert after == pytest.approx(before, abs=1e-9)
        assert cosine_score(elements, candidates[0], plain) == before[0]
        if max(before) - sorted(before)[-2] > 1e-9:
            assert int(np.argmax(after)) == int(np.argmax(before))
