from __future__ import annotations

import json
from pathlib import Path

import pytest

from kgprompt.errors import (
    MalformedResponseError,
    NetworkError,
    RateLimitedError,
    UnknownEntityError,
)
from kgprompt.remote import (
    CachePolicy,
    QueryCache,
    RemoteEndpoint,
    SPARQL_URL_ENV,
    fetch_entity_label,
    fetch_neighbors_remote,
    graph_from_remote_neighbors,
    load_query_template,
    resolve_entity,
)
from kgprompt.graph import Node


def endpoint_for(server) -> RemoteEndpoint:
    return RemoteEndpoint(
        sparql_url=server.sparql_url,
        entity_api_url=server.api_url,
        timeout=5.0,
        max_retries=1,
        backoff=0.01,
    )


def cache_in(tmp_path: Path, policy=CachePolicy.READ_WRITE) -> QueryCache:
    return QueryCache(root_dir=tmp_path / "cache", policy=policy)


PC_SEARCH = [("Q181257", "prostate cancer", "cancer that affects the prostate gland")]
PC_NEIGHBORS_OUT = [
    ("P2176", "drug or therapy used for treatment", "Q412415", "nilutamide"),
    ("P1995", "health specialty", "Q105650", "urology"),
]
PC_NEIGHBORS_IN = [
    ("P2293", "genetic association", "Q14865813", "FSHR"),
]


def seed_prostate(server):
    server.search["prostate cancer"] = PC_SEARCH
    server.labels["Q181257"] = "prostate cancer"
    server.neighbors[("Q181257", "out")] = PC_NEIGHBORS_OUT
    server.neighbors[("Q181257", "in")] = PC_NEIGHBORS_IN


def test_resolve_entity_recorded_fixture(wiki_server, tmp_path):
    seed_prostate(wiki_server)
    results = resolve_entity(endpoint_for(wiki_server), cache_in(tmp_path), "prostate cancer")
    assert results[0][0] == "Q181257"
    assert results[0][1] == "prostate cancer"


def test_resolve_entity_empty_name_rejected(wiki_server, tmp_path):
    with pytest.raises(ValueError):
        resolve_entity(endpoint_for(wiki_server), cache_in(tmp_path), "")


def test_resolve_entity_no_match(wiki_server, tmp_path):
    assert resolve_entity(endpoint_for(wiki_server), cache_in(tmp_path), "zxqv gibberish") == []


def test_fetch_neighbors_sorted_and_labeled(wiki_server, tmp_path):
    seed_prostate(wiki_server)
    links = fetch_neighbors_remote(endpoint_for(wiki_server), cache_in(tmp_path), "Q181257")
    assert [(n.id, label, direction) for n, label, direction in links] == [
        ("Q105650", "health specialty", "out"),
        ("Q412415", "drug or therapy used for treatment", "out"),
        ("Q14865813", "genetic association", "in"),
    ]
    labels = {label for _n, label, _d in links}
    assert "drug or therapy used for treatment" in labels


def test_fetch_neighbors_zero_statements(wiki_server, tmp_path):
    wiki_server.labels["Q999"] = "lonely"
    assert fetch_neighbors_remote(endpoint_for(wiki_server), cache_in(tmp_path), "Q999") == []


def test_fetch_neighbors_invalid_id(wiki_server, tmp_path):
    with pytest.raises(UnknownEntityError):
        fetch_neighbors_remote(endpoint_for(wiki_server), cache_in(tmp_path), "not-an-id")


def test_cache_replays_without_network(wiki_server, tmp_path):
    seed_prostate(wiki_server)
    cache_dir = tmp_path / "cache"
    endpoint = endpoint_for(wiki_server)
    warm = QueryCache(root_dir=cache_dir, policy=CachePolicy.READ_WRITE)
    first = fetch_neighbors_remote(endpoint, warm, "Q181257")
    first_label = fetch_entity_label(endpoint, warm, "Q181257")
    requests_used = wiki_server.request_count
    wiki_server.stop()

    dead = RemoteEndpoint(
        sparql_url="http://127.0.0.1:9/sparql",
        entity_api_url="http://127.0.0.1:9/api",
        timeout=0.5,
        max_retries=0,
        backoff=0.01,
    )
    replay = QueryCache(root_dir=cache_dir, policy=CachePolicy.READ_ONLY)
    assert fetch_neighbors_remote(dead, replay, "Q181257") == first
    assert fetch_entity_label(dead, replay, "Q181257") == first_label == "prostate cancer"
    assert wiki_server.request_count == requests_used


def test_read_only_cache_miss_is_network_error(tmp_path):
    dead = RemoteEndpoint(sparql_url="http://127.0.0.1:9/sparql", timeout=0.5, max_retries=0)
    cache = cache_in(tmp_path, policy=CachePolicy.READ_ONLY)
    with pytest.raises(NetworkError, match="read_only"):
        fetch_neighbors_remote(dead, cache, "Q1")


def test_cache_entries_are_immutable(wiki_server, tmp_path):
    seed_prostate(wiki_server)
    cache_dir = tmp_path / "cache"
    cache = QueryCache(root_dir=cache_dir, policy=CachePolicy.READ_WRITE)
    endpoint = endpoint_for(wiki_server)
    fetch_neighbors_remote(endpoint, cache, "Q181257")
    entries = sorted(cache_dir.rglob("*.json"))
    before = [p.read_bytes() for p in entries]
    fetch_neighbors_remote(endpoint, cache, "Q181257")  # served from cache
    assert [p.read_bytes() for p in sorted(cache_dir.rglob("*.json"))] == before
    entry = json.loads(entries[0].read_text(encoding="utf-8"))
    assert set(entry) == {"query", "fetched_at", "response"}
    # layout: root/<first two hash chars>/<hash>.json
    assert entries[0].parent.name == entries[0].stem[:2]


def test_rate_limited_surfaces_retry_after(wiki_server, tmp_path, monkeypatch):
    import requests as requests_module

    class Fake429:
        status_code = 429
        headers = {"Retry-After": "17"}

    def fake_post(*args, **kwargs):
        return Fake429()

    monkeypatch.setattr(requests_module, "post", fake_post)
    cache = cache_in(tmp_path, policy=CachePolicy.BYPASS)
    with pytest.raises(RateLimitedError) as err:
        fetch_neighbors_remote(endpoint_for(wiki_server), cache, "Q181257")
    assert err.value.retry_after == 17.0


def test_env_var_overrides_sparql_url(wiki_server, tmp_path, monkeypatch):
    seed_prostate(wiki_server)
    monkeypatch.setenv(SPARQL_URL_ENV, wiki_server.sparql_url)
    endpoint = RemoteEndpoint(
        sparql_url="http://unreachable.invalid/sparql",
        entity_api_url=wiki_server.api_url,
        timeout=5.0,
        max_retries=0,
    )
    links = fetch_neighbors_remote(endpoint, cache_in(tmp_path), "Q181257")
    assert links  # served by the stub, not the configured unreachable URL


def test_query_templates_ship_with_entity_parameter():
    for name in ("one_hop_out.rq", "one_hop_in.rq", "label_lookup.rq"):
        template = load_query_template(name)
        assert "$ENTITY" in template
        assert template.lstrip().startswith("#")  # documented header


def test_graph_from_remote_neighbors_star():
    x = Node(id="Q181257", name="prostate cancer")
    links = [
        (Node(id="Q412415", name="nilutamide"), "drug or therapy used for treatment", "out"),
        (Node(id="Q14865813", name="FSHR"), "genetic association", "in"),
        (Node(id="Q412415", name="nilutamide"), "drug or therapy used for treatment", "out"),
    ]
    star = graph_from_remote_neighbors(x, links)
    assert star.node_count == 3
    assert star.edge_count == 2  # duplicate link collapsed
    assert {n.name for n in star.neighbors("Q181257")} == {"nilutamide", "FSHR"}


def test_malformed_sparql_response(wiki_server, tmp_path, monkeypatch):
    import requests as requests_module

    class FakeOk:
        status_code = 200

        @staticmethod
        def json():
            return {"unexpected": True}

    monkeypatch.setattr(requests_module, "post", lambda *a, **k: FakeOk())
    cache = cache_in(tmp_path, policy=CachePolicy.BYPASS)
    with pytest.raises(MalformedResponseError):
        fetch_neighbors_remote(endpoint_for(wiki_server), cache, "Q1")
