from __future__ import annotations

import pytest

from kgprompt.dataset import CAUSAL, Instance, Span
from kgprompt.errors import OverrideConflictError
from kgprompt.linking import (
    EXACT,
    MANUAL_OVERRIDE,
    NORMALIZED,
    UNRESOLVED,
    link_pairs,
    normalize_name,
)

from fixtures_kg import make_graph


def instance_for(text: str, e1: str, e2: str) -> Instance:
    s1 = text.index(e1)
    s2 = text.index(e2)
    return Instance("i1", text, Span(s1, s1 + len(e1)), Span(s2, s2 + len(e2)), CAUSAL)


KG = make_graph(
    [("n1", "prostate cancer", "disease"), ("n2", "FGF6", "gene"), ("n3", "beta-carotene", "compound")],
    [("n2", "n1", "genetic association"), ("n3", "n1", "affects")],
)


def test_exact_match():
    instance = instance_for("FGF6 drives prostate cancer progression.", "FGF6", "prostate cancer")
    (linkage,) = link_pairs([instance], KG)
    assert (linkage.e1_node, linkage.e1_method) == ("n2", EXACT)
    assert (linkage.e2_node, linkage.e2_method) == ("n1", EXACT)


def test_normalized_match():
    instance = instance_for("Prostate Cancer is influenced by beta carotene.", "Prostate Cancer", "beta carotene")
    (linkage,) = link_pairs([instance], KG)
    assert (linkage.e1_node, linkage.e1_method) == ("n1", NORMALIZED)
    assert (linkage.e2_node, linkage.e2_method) == ("n3", NORMALIZED)


def test_unresolved_marker():
    instance = instance_for("Quizzical thing meets prostate cancer.", "Quizzical thing", "prostate cancer")
    (linkage,) = link_pairs([instance], KG)
    assert linkage.e1_node is None
    assert linkage.e1_method == UNRESOLVED
    assert linkage.e2_node == "n1"


def test_override_used_only_after_name_matching():
    instance = instance_for("P53 pathway and prostate cancer interact.", "P53 pathway", "prostate cancer")
    (linkage,) = link_pairs([instance], KG, overrides={"P53 pathway": "n2", "prostate cancer": "n3"})
    assert (linkage.e1_node, linkage.e1_method) == ("n2", MANUAL_OVERRIDE)
    # exact name match wins over the override table
    assert (linkage.e2_node, linkage.e2_method) == ("n1", EXACT)


def test_override_pointing_nowhere_conflicts():
    instance = instance_for("FGF6 drives prostate cancer progression.", "FGF6", "prostate cancer")
    with pytest.raises(OverrideConflictError):
        link_pairs([instance], KG, overrides={"anything": "ghost-node"})


def test_normalize_name():
    assert normalize_name("Beta-Carotene") == "beta carotene"
    assert normalize_name("  FGF6 ") == "fgf6"
    assert normalize_name("breast   cancer!") == "breast cancer"
