"""Link dataset pair names to knowledge-graph node ids.

Resolution tries an exact name match first, then a case/punctuation
normalized match, then a manual override table; whatever is left is an
unresolved marker, never a failure, so downstream stages degrade to an
empty graph context instead of dropping the instance.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .dataset import Instance
from .errors import OverrideConflictError
from .graph import KnowledgeGraph

EXACT = "exact"
NORMALIZED = "normalized"
MANUAL_OVERRIDE = "manual_override"
UNRESOLVED = "unresolved"

_PUNCT = re.compile(r"[^\w\s]", re.UNICODE)
_SPACES = re.compile(r"\s+")


def normalize_name(name: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    return _SPACES.sub(" ", _PUNCT.sub(" ", name.casefold())).strip()


@dataclass(frozen=True)
class PairLinkage:
    instance_id: str
    e1_node: str | None
    e2_node: str | None
    e1_method: str = UNRESOLVED
    e2_method: str = UNRESOLVED

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "e1_node": self.e1_node,
            "e2_node": self.e2_node,
            "e1_method": self.e1_method,
            "e2_method": self.e2_method,
        }


def load_overrides(path: str | Path) -> dict[str, str]:
    """Read a manual override table: pair name -> node id."""
    with Path(path).open("r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in data.items()
    ):
        raise OverrideConflictError("override table must map name strings to node id strings")
    return data


def link_pairs(
    instances: list[Instance],
    kg: KnowledgeGraph,
    overrides: dict[str, str] | None = None,
) -> list[PairLinkage]:
    """Resolve every instance's pair names against the graph's node names.

    When several nodes share a name the first by node insertion order wins,
    which keeps linking deterministic. An override naming a node id absent
    from the graph is a conflict and fails loudly.
    """
    overrides = overrides or {}
    for name, node_id in overrides.items():
        if not kg.has_node(node_id):
            raise OverrideConflictError(
                f"override for {name!r} points at unknown node id {node_id!r}"
            )

    exact: dict[str, str] = {}
    normalized: dict[str, str] = {}
    for node in kg.nodes.values():
        exact.setdefault(node.name, node.id)
        normalized.setdefault(normalize_name(node.name), node.id)

    def resolve(name: str) -> tuple[str | None, str]:
        if name in exact:
            return exact[name], EXACT
        norm = normalize_name(name)
        if norm in normalized:
            return normalized[norm], NORMALIZED
        if name in overrides:
            return overrides[name], MANUAL_OVERRIDE
        return None, UNRESOLVED

    linkages = []
    for instance in instances:
        e1_node, e1_method = resolve(instance.e1)
        e2_node, e2_method = resolve(instance.e2)
        linkages.append(
            PairLinkage(
                instance_id=instance.instance_id,
                e1_node=e1_node,
                e2_node=e2_node,
                e1_method=e1_method,
                e2_method=e2_method,
            )
        )
    return linkages
