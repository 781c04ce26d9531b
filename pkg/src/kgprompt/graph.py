"""In-memory directed labeled knowledge graph with adjacency queries.

The graph is immutable once constructed: loaders accumulate nodes and edges
and build the graph in one shot, after which any number of workers may query
it concurrently. Edges are directed, but the default adjacency policy treats
them as undirected because relational evidence flows both ways for the
extraction queries built on top of this module; directed policies are kept
for experiments.

All query results are deterministically ordered by the insertion order of
the first contributing edge, so downstream verbalization and seeded subset
selection are reproducible run to run.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, Iterator, Literal

from .errors import DuplicateEdgeError, UnknownNodeError

Direction = Literal["out", "in"]
OUT: Direction = "out"
IN: Direction = "in"


class DirectionPolicy(Enum):
    """How adjacency queries treat edge direction."""

    UNDIRECTED = "undirected"
    OUT_ONLY = "out_only"
    IN_ONLY = "in_only"


@dataclass(frozen=True, slots=True)
class Node:
    id: str
    name: str
    node_type: str = "unknown"


@dataclass(frozen=True, slots=True)
class Edge:
    source: str
    target: str
    label: str


class KnowledgeGraph:
    """Directed labeled graph over string node ids.

    Parallel edges between the same pair are allowed as long as their labels
    differ; exact duplicate (source, target, label) triples are rejected so
    they cannot silently inflate common-neighbor counts.
    """

    def __init__(self, nodes: Iterable[Node] = (), edges: Iterable[Edge] = ()):
        self._nodes: dict[str, Node] = {}
        self._edges: list[Edge] = []
        # per-node adjacency in global edge-insertion order:
        # (edge ordinal, other endpoint, label, direction as seen from the node)
        self._adj: dict[str, list[tuple[int, str, str, Direction]]] = {}
        self._edge_keys: set[tuple[str, str, str]] = set()
        for node in nodes:
            self._add_node(node)
        for edge in edges:
            self._add_edge(edge)

    def _add_node(self, node: Node) -> None:
        if not node.id:
            raise ValueError("node id must be non-empty")
        if not node.name:
            raise ValueError(f"node {node.id!r}: name must be non-empty")
        if node.id in self._nodes:
            raise ValueError(f"duplicate node id: {node.id!r}")
        self._nodes[node.id] = node
        self._adj[node.id] = []

    def _add_edge(self, edge: Edge) -> None:
        for endpoint in (edge.source, edge.target):
            if endpoint not in self._nodes:
                raise UnknownNodeError(endpoint)
        if not edge.label:
            raise ValueError("edge label must be non-empty")
        key = (edge.source, edge.target, edge.label)
        if key in self._edge_keys:
            raise DuplicateEdgeError(f"duplicate edge: {key!r}")
        ordinal = len(self._edges)
        self._edges.append(edge)
        self._edge_keys.add(key)
        self._adj[edge.source].append((ordinal, edge.target, edge.label, OUT))
        if edge.target != edge.source:
            self._adj[edge.target].append((ordinal, edge.source, edge.label, IN))

    # --- basic accessors ---

    @property
    def nodes(self) -> dict[str, Node]:
        return self._nodes

    @property
    def edges(self) -> list[Edge]:
        return self._edges

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def has_node(self, node_id: str) -> bool:
        return node_id in self._nodes

    def node(self, node_id: str) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    @property
    def node_types(self) -> set[str]:
        return {n.node_type for n in self._nodes.values()}

    @cached_property
    def out_index(self) -> dict[str, list[tuple[str, str]]]:
        index: dict[str, list[tuple[str, str]]] = {nid: [] for nid in self._nodes}
        for edge in self._edges:
            index[edge.source].append((edge.target, edge.label))
        return index

    @cached_property
    def in_index(self) -> dict[str, list[tuple[str, str]]]:
        index: dict[str, list[tuple[str, str]]] = {nid: [] for nid in self._nodes}
        for edge in self._edges:
            index[edge.target].append((edge.source, edge.label))
        return index

    # --- adjacency queries ---

    def adjacency(
        self, x: str, policy: DirectionPolicy = DirectionPolicy.UNDIRECTED
    ) -> Iterator[tuple[str, str, Direction]]:
        """Yield (other id, label, direction) links of x in insertion order.

        Self-loops are skipped: a node is never its own neighbor.
        """
        if x not in self._nodes:
            raise UnknownNodeError(x)
        for _ordinal, other, label, direction in self._adj[x]:
            if other == x:
                continue
            if policy is DirectionPolicy.OUT_ONLY and direction != OUT:
                continue
            if policy is DirectionPolicy.IN_ONLY and direction != IN:
                continue
            yield other, label, direction

    def neighbors(
        self, x: str, policy: DirectionPolicy = DirectionPolicy.UNDIRECTED
    ) -> list[Node]:
        """Nodes sharing an edge with x, deduplicated, in first-edge order."""
        seen: set[str] = set()
        result: list[Node] = []
        for other, _label, _direction in self.adjacency(x, policy):
            if other not in seen:
                seen.add(other)
                result.append(self._nodes[other])
        return result

    def k_hop_neighbors(
        self, x: str, k: int, policy: DirectionPolicy = DirectionPolicy.UNDIRECTED
    ) -> list[list[Node]]:
        """Per-hop node lists: hop h holds nodes at shortest distance exactly h.

        x itself never appears and hops are pairwise disjoint.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        if x not in self._nodes:
            raise UnknownNodeError(x)
        visited = {x}
        frontier = [x]
        hops: list[list[Node]] = []
        for _hop in range(k):
            next_ids: list[str] = []
            for current in frontier:
                for other, _label, _direction in self.adjacency(current, policy):
                    if other not in visited:
                        visited.add(other)
                        next_ids.append(other)
            hops.append([self._nodes[nid] for nid in next_ids])
            frontier = next_ids
        return hops

    def has_direct_edge(self, x: str, y: str) -> bool:
        """True iff an edge x->y or y->x exists (orientation ignored)."""
        if y not in self._nodes:
            raise UnknownNodeError(y)
        return any(other == y for other, _l, _d in self.adjacency(x))

    def relation_labels_between(self, x: str, y: str) -> list[tuple[str, Direction]]:
        """All labels on edges between x and y with their original direction.

        Direction is relative to x: "out" means the stored edge runs x->y.
        Order follows edge insertion order; empty when no edge exists.
        """
        if y not in self._nodes:
            raise UnknownNodeError(y)
        return [
            (label, direction)
            for other, label, direction in self.adjacency(x)
            if other == y
        ]
