"""Load knowledge graphs from local dump files.

Two formats are supported: the published Hetionet JSON dump (single JSON
document with ``nodes`` and ``edges`` arrays) and a line-delimited JSON
edge-list format used for fixtures and third-party graphs. Loading is
single-threaded; the resulting graph inherits the immutability contract of
:mod:`kgprompt.graph`.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import ParseError, SchemaError
from .graph import Edge, KnowledgeGraph, Node

# Warnings kept verbatim in the report are capped; counts stay exact.
_MAX_WARNINGS = 50

_HETIONET_DIRECTIONS = ("forward", "backward", "both")


@dataclass
class IngestReport:
    nodes_loaded: int = 0
    edges_loaded: int = 0
    duplicates_rejected: int = 0
    warnings: list[str] = field(default_factory=list)
    _suppressed: int = 0

    def warn(self, message: str) -> None:
        if len(self.warnings) < _MAX_WARNINGS:
            self.warnings.append(message)
        else:
            self._suppressed += 1

    def finish(self) -> None:
        if self._suppressed:
            self.warnings.append(f"... {self._suppressed} further warnings suppressed")
            self._suppressed = 0


def hetionet_node_id(kind: str, identifier: object) -> str:
    """Composite node id used for Hetionet records, e.g. ``Gene::5468``."""
    return f"{kind}::{identifier}"


def _require(record: dict, fields: Iterable[str], what: str, line: int | None = None) -> None:
    for name in fields:
        if name not in record:
            raise SchemaError(f"{what}: missing field {name!r}", line=line)


def load_hetionet_json(path: str | Path) -> tuple[KnowledgeGraph, IngestReport]:
    """Load the Hetionet JSON dump format into a KnowledgeGraph.

    Node records carry kind/identifier/name; edge records carry source_id,
    target_id, kind and a direction marker. "both"-direction edges are
    expanded into two directed edges so the in-memory model stays purely
    directed while preserving undirected semantics. Exact duplicate triples
    are skipped with a warning, never a failure.
    """
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at column {exc.colno}: {exc.msg}", line=exc.lineno) from exc

    if not isinstance(data, dict):
        raise SchemaError("top-level document must be a JSON object")
    _require(data, ("nodes", "edges"), "top-level document")

    report = IngestReport()
    nodes: list[Node] = []
    node_ids: set[str] = set()
    for i, record in enumerate(data["nodes"]):
        _require(record, ("kind", "identifier", "name"), f"node record {i}")
        kind = sys.intern(str(record["kind"]))
        node_id = sys.intern(hetionet_node_id(kind, record["identifier"]))
        if node_id in node_ids:
            report.warn(f"node record {i}: duplicate node id {node_id!r} skipped")
            continue
        node_ids.add(node_id)
        nodes.append(Node(id=node_id, name=str(record["name"]), node_type=kind))

    edges: list[Edge] = []
    edge_keys: set[tuple[str, str, str]] = set()
    for i, record in enumerate(data["edges"]):
        _require(record, ("source_id", "target_id", "kind", "direction"), f"edge record {i}")
        source = sys.intern(hetionet_node_id(*_endpoint(record["source_id"], i, "source_id")))
        target = sys.intern(hetionet_node_id(*_endpoint(record["target_id"], i, "target_id")))
        for endpoint in (source, target):
            if endpoint not in node_ids:
                raise SchemaError(f"edge record {i}: unknown node id {endpoint!r}")
        label = sys.intern(str(record["kind"]))
        direction = record["direction"]
        if direction not in _HETIONET_DIRECTIONS:
            raise SchemaError(f"edge record {i}: unknown direction marker {direction!r}")
        oriented: list[tuple[str, str]] = []
        if direction in ("forward", "both"):
            oriented.append((source, target))
        if direction in ("backward", "both"):
            oriented.append((target, source))
        added = 0
        for src, dst in oriented:
            key = (src, dst, label)
            if key in edge_keys:
                report.duplicates_rejected += 1
                report.warn(f"edge record {i}: duplicate edge {key!r} skipped")
                continue
            edge_keys.add(key)
            edges.append(Edge(source=src, target=dst, label=label))
            added += 1
        if added:
            report.edges_loaded += 1

    graph = KnowledgeGraph(nodes, edges)
    report.nodes_loaded = graph.node_count
    report.finish()
    return graph, report


def _endpoint(value: object, record_index: int, field_name: str) -> tuple[str, object]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise SchemaError(
            f"edge record {record_index}: {field_name} must be a [kind, identifier] pair"
        )
    return str(value[0]), value[1]


def load_edge_list_jsonl(path: str | Path) -> tuple[KnowledgeGraph, IngestReport]:
    """Load the JSONL edge-list interchange format.

    Each line is either ``{"node": {"id", "name", "type"}}`` or
    ``{"edge": {"source", "target", "label"}}``; the graph is assembled in
    file order, so a node must appear before any edge referencing it.
    """
    path = Path(path)
    report = IngestReport()
    nodes: list[Node] = []
    node_ids: set[str] = set()
    edges: list[Edge] = []
    edge_keys: set[tuple[str, str, str]] = set()

    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            if not isinstance(record, dict):
                raise SchemaError("record must be a JSON object", line=lineno)
            has_node = "node" in record
            has_edge = "edge" in record
            if has_node and has_edge:
                raise SchemaError("record has both 'node' and 'edge' keys", line=lineno)
            if not has_node and not has_edge:
                raise SchemaError("record has neither 'node' nor 'edge' key", line=lineno)

            if has_node:
                body = record["node"]
                _require(body, ("id", "name"), "node record", line=lineno)
                node_id = sys.intern(str(body["id"]))
                if node_id in node_ids:
                    report.warn(f"line {lineno}: duplicate node id {node_id!r} skipped")
                    continue
                node_ids.add(node_id)
                nodes.append(
                    Node(
                        id=node_id,
                        name=str(body["name"]),
                        node_type=sys.intern(str(body.get("type", "unknown"))),
                    )
                )
            else:
                body = record["edge"]
                _require(body, ("source", "target", "label"), "edge record", line=lineno)
                source = sys.intern(str(body["source"]))
                target = sys.intern(str(body["target"]))
                for endpoint in (source, target):
                    if endpoint not in node_ids:
                        raise SchemaError(f"edge references unknown node id {endpoint!r}", line=lineno)
                label = sys.intern(str(body["label"]))
                key = (source, target, label)
                if key in edge_keys:
                    report.duplicates_rejected += 1
                    report.warn(f"line {lineno}: duplicate edge {key!r} skipped")
                    continue
                edge_keys.add(key)
                edges.append(Edge(source=source, target=target, label=label))
                report.edges_loaded += 1

    graph = KnowledgeGraph(nodes, edges)
    report.nodes_loaded = graph.node_count
    report.finish()
    return graph, report


def export_edge_list_jsonl(kg: KnowledgeGraph, path: str | Path) -> int:
    """Write a graph in the JSONL edge-list format; returns lines written.

    Nodes are written before edges so the file reloads in a single pass;
    reloading reproduces the graph exactly (node set, edge list, labels).
    """
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        for node in kg.nodes.values():
            record = {"node": {"id": node.id, "name": node.name, "type": node.node_type}}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
        for edge in kg.edges:
            record = {"edge": {"source": edge.source, "target": edge.target, "label": edge.label}}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count
