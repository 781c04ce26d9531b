"""Remote 1-hop structure and entity resolution over SPARQL/HTTP, cached.

Remote querying is deliberately limited to one hop; deeper structure comes
only from locally ingested graphs. Every response is cached on disk under a
content hash of the canonical request, so a warmed cache replays an entire
experiment byte-for-byte with no network access (``read_only`` policy).

Requests are issued sequentially with an optional politeness delay; public
endpoints rate-limit, and determinism matters more than throughput here.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import string
import tempfile
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from importlib.resources import files as resource_files
from pathlib import Path
from typing import Iterable

import requests

from .errors import (
    MalformedResponseError,
    NetworkError,
    RateLimitedError,
    UnknownEntityError,
)
from .graph import Direction, Edge, KnowledgeGraph, Node

SPARQL_URL_ENV = "KGPROMPT_SPARQL_URL"
ENTITY_API_URL_ENV = "KGPROMPT_ENTITY_API_URL"

_ENTITY_ID = re.compile(r"^[QP]\d+$")
_TRANSIENT_STATUSES = {500, 502, 503, 504}


@dataclass(frozen=True)
class RemoteEndpoint:
    sparql_url: str = "https://query.wikidata.org/sparql"
    entity_api_url: str = "https://www.wikidata.org/w/api.php"
    user_agent: str = "kgprompt/0.1 (graph-context extraction)"
    timeout: float = 30.0
    max_retries: int = 3
    backoff: float = 1.0
    politeness_delay: float = 0.0

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        for name in ("sparql_url", "entity_api_url"):
            if not getattr(self, name).startswith(("http://", "https://")):
                raise ValueError(f"{name} must be an http(s) URL")

    @property
    def effective_sparql_url(self) -> str:
        return os.environ.get(SPARQL_URL_ENV, self.sparql_url)

    @property
    def effective_entity_api_url(self) -> str:
        return os.environ.get(ENTITY_API_URL_ENV, self.entity_api_url)


class CachePolicy(Enum):
    READ_WRITE = "read_write"
    READ_ONLY = "read_only"
    BYPASS = "bypass"


@dataclass(frozen=True)
class QueryCache:
    """Content-addressed response cache: root/<2 hash chars>/<hash>.json.

    Entries are immutable once written; writers use write-then-rename so
    concurrent clients can share a cache directory safely.
    """

    root_dir: Path
    policy: CachePolicy = CachePolicy.READ_WRITE

    @staticmethod
    def key_for(canonical_query: str) -> str:
        return hashlib.sha256(canonical_query.encode("utf-8")).hexdigest()

    def _entry_path(self, key: str) -> Path:
        return Path(self.root_dir) / key[:2] / f"{key}.json"

    def load(self, key: str) -> dict | None:
        path = self._entry_path(key)
        if not path.exists():
            return None
        with path.open("r", encoding="utf-8") as fh:
            return json.load(fh)

    def store(self, key: str, canonical_query: str, response: object) -> None:
        path = self._entry_path(key)
        if path.exists():  # entries are immutable; a retry never rewrites
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        entry = {
            "query": canonical_query,
            "fetched_at": datetime.now(timezone.utc).isoformat(),
            "response": response,
        }
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(entry, fh, ensure_ascii=False)
            os.replace(tmp_name, path)
        finally:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)


def _canonical_request(kind: str, params: dict[str, str]) -> str:
    # URL-independent on purpose: a warmed cache must replay even when the
    # endpoint is re-pointed (e.g. offline runs against a stub or no server).
    encoded = "&".join(f"{k}={params[k]}" for k in sorted(params))
    return f"{kind}\n{encoded}"


def _fetch_json(
    endpoint: RemoteEndpoint,
    cache: QueryCache,
    kind: str,
    url: str,
    params: dict[str, str],
    headers: dict[str, str],
) -> dict:
    canonical = _canonical_request(kind, params)
    key = QueryCache.key_for(canonical)
    if cache.policy is not CachePolicy.BYPASS:
        cached = cache.load(key)
        if cached is not None:
            return cached["response"]
    if cache.policy is CachePolicy.READ_ONLY:
        raise NetworkError(f"cache miss for {kind} request under read_only policy")

    last_error: Exception | None = None
    for attempt in range(endpoint.max_retries + 1):
        if attempt:
            time.sleep(endpoint.backoff * 2 ** (attempt - 1))
        elif endpoint.politeness_delay:
            time.sleep(endpoint.politeness_delay)
        try:
            raw = requests.post(url, data=params, headers=headers, timeout=endpoint.timeout)
        except requests.RequestException as exc:
            last_error = exc
            continue
        if raw.status_code == 429:
            retry_after = raw.headers.get("Retry-After")
            raise RateLimitedError(
                f"rate limited by {url}",
                retry_after=float(retry_after) if retry_after else None,
            )
        if raw.status_code in _TRANSIENT_STATUSES:
            last_error = NetworkError(f"transient HTTP {raw.status_code} from {url}")
            continue
        if raw.status_code != 200:
            raise NetworkError(f"HTTP {raw.status_code} from {url}")
        try:
            payload = raw.json()
        except ValueError as exc:
            raise MalformedResponseError(f"response from {url} is not JSON: {exc}") from exc
        if cache.policy is CachePolicy.READ_WRITE:
            cache.store(key, canonical, payload)
        return payload
    raise NetworkError(
        f"{kind} request to {url} failed after {endpoint.max_retries + 1} attempts: {last_error}"
    )


def load_query_template(name: str) -> str:
    return (resource_files("kgprompt") / "queries" / name).read_text(encoding="utf-8")


def _render_query(name: str, entity_id: str) -> str:
    return string.Template(load_query_template(name)).substitute(ENTITY=entity_id)


def _run_sparql(
    endpoint: RemoteEndpoint, cache: QueryCache, template: str, entity_id: str
) -> list[dict]:
    query = _render_query(template, entity_id)
    payload = _fetch_json(
        endpoint,
        cache,
        kind="sparql",
        url=endpoint.effective_sparql_url,
        params={"query": query, "format": "json"},
        headers={"User-Agent": endpoint.user_agent, "Accept": "application/sparql-results+json"},
    )
    try:
        bindings = payload["results"]["bindings"]
    except (KeyError, TypeError):
        raise MalformedResponseError("SPARQL response misses results.bindings") from None
    if not isinstance(bindings, list):
        raise MalformedResponseError("results.bindings is not a list")
    return bindings


def _last_segment(iri: str) -> str:
    return iri.rsplit("/", 1)[-1]


def resolve_entity(
    endpoint: RemoteEndpoint, cache: QueryCache, name: str
) -> list[tuple[str, str, str]]:
    """Entity-search candidates for a name: (entity id, label, description).

    Candidates keep the endpoint's rank order; an unresolvable name yields
    an empty list.
    """
    if not name:
        raise ValueError("name must be non-empty")
    payload = _fetch_json(
        endpoint,
        cache,
        kind="wbsearchentities",
        url=endpoint.effective_entity_api_url,
        params={
            "action": "wbsearchentities",
            "search": name,
            "language": "en",
            "type": "item",
            "format": "json",
        },
        headers={"User-Agent": endpoint.user_agent},
    )
    if not isinstance(payload, dict) or "search" not in payload:
        raise MalformedResponseError("entity search response misses 'search'")
    results = []
    for item in payload["search"]:
        if "id" not in item:
            raise MalformedResponseError("entity search result misses 'id'")
        results.append((item["id"], item.get("label", ""), item.get("description", "")))
    return results


def fetch_entity_label(endpoint: RemoteEndpoint, cache: QueryCache, entity_id: str) -> str:
    """English label of an entity; falls back to the id when unlabeled."""
    if not _ENTITY_ID.match(entity_id):
        raise UnknownEntityError(f"{entity_id!r} is not a valid entity id")
    bindings = _run_sparql(endpoint, cache, "label_lookup.rq", entity_id)
    for row in bindings:
        value = row.get("label", {}).get("value")
        if value:
            return value
    return entity_id


def fetch_neighbors_remote(
    endpoint: RemoteEndpoint, cache: QueryCache, x: str
) -> list[tuple[Node, str, Direction]]:
    """All statement-based 1-hop neighbors of x with readable relation labels.

    Rows are sorted by (property id, neighbor id, direction) so results are
    deterministic regardless of endpoint ordering. Only entity-valued
    statements appear; literals have no node identity to verbalize.
    """
    if not _ENTITY_ID.match(x):
        raise UnknownEntityError(f"{x!r} is not a valid entity id")
    rows: list[tuple[str, str, str, str, Direction]] = []
    for template, direction in (("one_hop_out.rq", "out"), ("one_hop_in.rq", "in")):
        for binding in _run_sparql(endpoint, cache, template, x):
            try:
                property_iri = binding["property"]["value"]
                neighbor_iri = binding["neighbor"]["value"]
            except (KeyError, TypeError):
                raise MalformedResponseError("SPARQL binding misses property/neighbor") from None
            property_id = _last_segment(property_iri)
            neighbor_id = _last_segment(neighbor_iri)
            property_label = binding.get("propertyLabel", {}).get("value", property_id)
            neighbor_label = binding.get("neighborLabel", {}).get("value", neighbor_id)
            rows.append((property_id, neighbor_id, property_label, neighbor_label, direction))
    rows.sort(key=lambda r: (r[0], r[1], r[4]))
    return [
        (Node(id=neighbor_id, name=neighbor_label, node_type="unknown"), property_label, direction)
        for _pid, neighbor_id, property_label, neighbor_label, direction in rows
    ]


def graph_from_remote_neighbors(
    x: Node, links: Iterable[tuple[Node, str, Direction]]
) -> KnowledgeGraph:
    """Assemble a one-hop star graph around x from fetched neighbor links."""
    nodes: dict[str, Node] = {x.id: x}
    edges: list[Edge] = []
    seen: set[tuple[str, str, str]] = set()
    for neighbor, label, direction in links:
        nodes.setdefault(neighbor.id, neighbor)
        source, target = (x.id, neighbor.id) if direction == "out" else (neighbor.id, x.id)
        key = (source, target, label)
        if key in seen:
            continue
        seen.add(key)
        edges.append(Edge(source=source, target=target, label=label))
    return KnowledgeGraph(nodes.values(), edges)
