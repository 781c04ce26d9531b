"""End-to-end experiment orchestration from a single JSON configuration.

A run is: ingest -> link pairs -> extract structures -> verbalize ->
build prompts -> split/sample -> predict -> evaluate, with every artifact
written under one output directory and a manifest capturing the config
hash, all seeds and a content hash per artifact. Re-running the same
configuration reproduces every pre-prediction artifact byte for byte, and
the prediction artifacts too when the backend is the deterministic mock.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .backend import (
    HttpEndpoint,
    predict_http_batch,
    predict_mock,
    request_for_prompt,
    write_predictions_jsonl,
)
from .dataset import (
    FewShotConfig,
    Instance,
    kfold_split,
    load_dataset_jsonl,
    make_fold_plan,
    sample_few_shot,
)
from .errors import ConfigError, KgPromptError, SamePairError, StageError
from .graph import KnowledgeGraph, Node
from .ingest import IngestReport, load_edge_list_jsonl, load_hetionet_json
from .linking import PairLinkage, link_pairs, load_overrides, EXACT, MANUAL_OVERRIDE, NORMALIZED, UNRESOLVED
from .metrics import (
    Metrics,
    aggregate_folds,
    compute_metrics,
    format_report,
    read_predictions_jsonl,
)
from .prompts import (
    Architecture,
    DEFAULT_MASK_TOKEN,
    LabelMapping,
    PromptInstance,
    TruncationPolicy,
    build_prompt,
    export_prompts_jsonl,
    truncate_prompt,
)
from .remote import (
    CachePolicy,
    QueryCache,
    RemoteEndpoint,
    fetch_entity_label,
    fetch_neighbors_remote,
    graph_from_remote_neighbors,
    resolve_entity,
)
from .structures import (
    ExtractionLimits,
    StructureBundle,
    StructureKind,
    extract_common_neighbors,
    extract_neighbors,
    enumerate_metapaths,
)
from .verbalize import (
    GraphContext,
    TemplateSet,
    combine_contexts,
    empty_context,
    verbalize_common_neighbors,
    verbalize_metapath,
    verbalize_neighbors,
    verbalize_neighbors_labeled,
)

STAGES = ("ingest", "link", "extract", "verbalize", "build-prompts", "split", "predict", "eval")

LOCAL_KG_KINDS = ("hetionet_json", "jsonl")
KG_KINDS = LOCAL_KG_KINDS + ("remote",)


@dataclass
class ExperimentConfig:
    dataset: str
    kg_kind: str
    out_dir: str
    kg_path: str | None = None
    cache_dir: str | None = None
    sparql_url: str | None = None
    entity_api_url: str | None = None
    structure: StructureKind = StructureKind.NN
    limits: ExtractionLimits = field(default_factory=ExtractionLimits)
    templates: TemplateSet = field(default_factory=TemplateSet)
    architecture: Architecture = Architecture.MLM
    label_mapping: LabelMapping = field(default_factory=LabelMapping.identity)
    few_shot: FewShotConfig = field(default_factory=FewShotConfig)
    n_folds: int = 5
    fold_seed: int = 203
    fold_stratified: bool = False
    selection_seed: int = 203
    truncation: TruncationPolicy = field(default_factory=TruncationPolicy)
    mask_token: str = DEFAULT_MASK_TOKEN
    nn_include_labels: bool = False
    backend_kind: str | None = None
    mock_seed: int = 203
    http_base_url: str | None = None
    http_timeout: float = 10.0
    http_max_retries: int = 3
    http_backoff: float = 0.5
    http_max_in_flight: int = 1
    overrides_path: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            return cls._from_dict(data)
        except (KeyError, TypeError, ValueError, KgPromptError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid experiment configuration: {exc}") from exc

    @classmethod
    def _from_dict(cls, data: dict) -> "ExperimentConfig":
        for required in ("dataset", "kg", "out_dir"):
            if required not in data:
                raise ConfigError(f"configuration misses required field {required!r}")
        kg = data["kg"]
        if not isinstance(kg, dict) or "kind" not in kg:
            raise ConfigError("kg must be an object with a 'kind' field")
        if kg["kind"] not in KG_KINDS:
            raise ConfigError(f"unknown kg kind {kg['kind']!r}; expected one of {KG_KINDS}")

        mapping_data = data.get("label_mapping", {"mode": "identity"})
        if mapping_data.get("mode", "identity") == "identity":
            mapping = LabelMapping.identity()
        else:
            mapping = LabelMapping.custom(mapping_data["causal"], mapping_data["non_causal"])

        folds = data.get("folds", {})
        backend = data.get("backend")
        backend_kind = backend.get("kind") if backend else None
        if backend_kind not in (None, "mock", "http"):
            raise ConfigError(f"unknown backend kind {backend_kind!r}")

        return cls(
            dataset=str(data["dataset"]),
            kg_kind=kg["kind"],
            kg_path=kg.get("path"),
            cache_dir=kg.get("cache_dir"),
            sparql_url=kg.get("sparql_url"),
            entity_api_url=kg.get("entity_api_url"),
            out_dir=str(data["out_dir"]),
            structure=StructureKind(data.get("structure", "NN")),
            limits=ExtractionLimits(**data.get("limits", {})),
            templates=TemplateSet(**data.get("templates", {})),
            architecture=Architecture.parse(data.get("architecture", "MLM")),
            label_mapping=mapping,
            few_shot=FewShotConfig(**data.get("few_shot", {})),
            n_folds=int(folds.get("n_folds", 5)),
            fold_seed=int(folds.get("seed", 203)),
            fold_stratified=bool(folds.get("stratified", False)),
            selection_seed=int(data.get("selection_seed", 203)),
            truncation=TruncationPolicy(**data.get("truncation", {})),
            mask_token=str(data.get("mask_token", DEFAULT_MASK_TOKEN)),
            nn_include_labels=bool(data.get("nn_include_labels", False)),
            backend_kind=backend_kind,
            mock_seed=int(backend.get("seed", 203)) if backend_kind == "mock" else 203,
            http_base_url=backend.get("base_url") if backend_kind == "http" else None,
            http_timeout=float(backend.get("timeout", 10.0)) if backend_kind == "http" else 10.0,
            http_max_retries=int(backend.get("max_retries", 3)) if backend_kind == "http" else 3,
            http_backoff=float(backend.get("backoff", 0.5)) if backend_kind == "http" else 0.5,
            http_max_in_flight=int(backend.get("max_in_flight", 1)) if backend_kind == "http" else 1,
            overrides_path=data.get("overrides"),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        try:
            with Path(path).open("r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read configuration file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_canonical_dict(self) -> dict:
        data = {
            "dataset": self.dataset,
            "kg": {
                "kind": self.kg_kind,
                "path": self.kg_path,
                "cache_dir": self.cache_dir,
                "sparql_url": self.sparql_url,
                "entity_api_url": self.entity_api_url,
            },
            "out_dir": self.out_dir,
            "structure": self.structure.value,
            "limits": {
                "max_neighbors": self.limits.max_neighbors,
                "max_common_neighbors": self.limits.max_common_neighbors,
                "max_metapaths": self.limits.max_metapaths,
                "max_hops": self.limits.max_hops,
                "max_paths_enumerated": self.limits.max_paths_enumerated,
            },
            "templates": {
                "nn_connective": self.templates.nn_connective,
                "nn_labeled_pre": self.templates.nn_labeled_pre,
                "nn_labeled_post": self.templates.nn_labeled_post,
                "cnn_prefix": self.templates.cnn_prefix,
                "mp_connective": self.templates.mp_connective,
                "mp_path_intro": self.templates.mp_path_intro,
                "list_separator": self.templates.list_separator,
                "final_conjunction": self.templates.final_conjunction,
            },
            "architecture": self.architecture.value,
            "label_mapping": {"mode": self.label_mapping.mode, **self.label_mapping.label_words()},
            "few_shot": {
                "k": self.few_shot.k,
                "seed": self.few_shot.seed,
                "stratified": self.few_shot.stratified,
            },
            "folds": {"n_folds": self.n_folds, "seed": self.fold_seed, "stratified": self.fold_stratified},
            "selection_seed": self.selection_seed,
            "truncation": {"max_units": self.truncation.max_units, "unit": self.truncation.unit},
            "mask_token": self.mask_token,
            "nn_include_labels": self.nn_include_labels,
            "backend": self._backend_dict(),
            "overrides": self.overrides_path,
        }
        return data

    def _backend_dict(self) -> dict | None:
        if self.backend_kind == "mock":
            return {"kind": "mock", "seed": self.mock_seed}
        if self.backend_kind == "http":
            return {
                "kind": "http",
                "base_url": self.http_base_url,
                "timeout": self.http_timeout,
                "max_retries": self.http_max_retries,
                "backoff": self.http_backoff,
                "max_in_flight": self.http_max_in_flight,
            }
        return None

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_canonical_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def validate_config(config: ExperimentConfig, check_paths: bool = True) -> None:
    """Raise ConfigError for any statically detectable misconfiguration."""
    if check_paths and not Path(config.dataset).exists():
        raise ConfigError(f"dataset file not found: {config.dataset}")
    if config.kg_kind in LOCAL_KG_KINDS:
        if not config.kg_path:
            raise ConfigError("local kg sources need kg.path")
        if check_paths and not Path(config.kg_path).exists():
            raise ConfigError(f"kg dump not found: {config.kg_path}")
    else:
        if not config.cache_dir:
            raise ConfigError("remote kg sources need kg.cache_dir for reproducibility")
        if config.structure is not StructureKind.NN:
            raise ConfigError(
                "remote kg sources support only the NN structure (remote querying is 1-hop)"
            )
    if config.structure is StructureKind.MP and config.limits.max_hops < 2:
        raise ConfigError("metapath extraction requires limits.max_hops >= 2")
    if config.backend_kind == "http" and not config.http_base_url:
        raise ConfigError("http backend needs base_url")
    if config.overrides_path and check_paths and not Path(config.overrides_path).exists():
        raise ConfigError(f"override table not found: {config.overrides_path}")
    if config.n_folds < 2:
        raise ConfigError("folds.n_folds must be >= 2")


# --- artifact helpers ---


def _write_json(path: Path, data: object) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def _write_jsonl(path: Path, records: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _bundle_record(instance_id: str, side: str, bundle: StructureBundle) -> dict:
    record = {
        "instance_id": instance_id,
        "side": side,
        "kind": bundle.kind.value,
        "pair": list(bundle.pair),
        "candidate_count": bundle.candidate_count,
        "truncated": bundle.truncated,
        "selection_seed": bundle.selection_seed,
    }
    if bundle.kind is StructureKind.NN:
        record["payload"] = [
            {
                "node": {"id": link.node.id, "name": link.node.name, "type": link.node.node_type},
                "labels": [[label, direction] for label, direction in link.labels],
            }
            for link in bundle.payload
        ]
    elif bundle.kind is StructureKind.CNN:
        record["payload"] = [
            {"id": n.id, "name": n.name, "type": n.node_type} for n in bundle.payload
        ]
    else:
        record["payload"] = [
            {
                "nodes": [{"id": n.id, "name": n.name, "type": n.node_type} for n in path.nodes],
                "edges": [[label, direction] for label, direction in path.edges],
            }
            for path in bundle.payload
        ]
    return record


# --- graph-context construction ---


class _LocalSource:
    """Structure extraction against a locally ingested graph."""

    def __init__(self, kg: KnowledgeGraph):
        self.kg = kg

    def node(self, node_id: str) -> Node:
        return self.kg.node(node_id)

    def extract(
        self, linkage: PairLinkage, config: ExperimentConfig
    ) -> list[tuple[str, StructureBundle]]:
        kind = config.structure
        seed = config.selection_seed
        if kind is StructureKind.NN:
            bundles = []
            for side, node_id in (("e1", linkage.e1_node), ("e2", linkage.e2_node)):
                if node_id is not None:
                    bundles.append((side, extract_neighbors(self.kg, node_id, config.limits, seed)))
            return bundles
        if linkage.e1_node is None or linkage.e2_node is None:
            return []
        try:
            if kind is StructureKind.CNN:
                bundle = extract_common_neighbors(
                    self.kg, linkage.e1_node, linkage.e2_node, config.limits, seed
                )
            else:
                bundle = enumerate_metapaths(
                    self.kg, linkage.e1_node, linkage.e2_node, config.limits, seed
                )
        except SamePairError:
            # both names linked to one node; nothing pairwise to extract
            return []
        return [("pair", bundle)]


class _RemoteSource:
    """NN-only structure extraction against cached 1-hop remote fetches."""

    def __init__(self, endpoint: RemoteEndpoint, cache: QueryCache):
        self.endpoint = endpoint
        self.cache = cache
        self._stars: dict[str, KnowledgeGraph] = {}

    def _star(self, entity_id: str) -> KnowledgeGraph:
        star = self._stars.get(entity_id)
        if star is None:
            name = fetch_entity_label(self.endpoint, self.cache, entity_id)
            links = fetch_neighbors_remote(self.endpoint, self.cache, entity_id)
            star = graph_from_remote_neighbors(Node(id=entity_id, name=name), links)
            self._stars[entity_id] = star
        return star

    def node(self, node_id: str) -> Node:
        return self._star(node_id).node(node_id)

    def extract(
        self, linkage: PairLinkage, config: ExperimentConfig
    ) -> list[tuple[str, StructureBundle]]:
        bundles = []
        for side, node_id in (("e1", linkage.e1_node), ("e2", linkage.e2_node)):
            if node_id is not None:
                star = self._star(node_id)
                bundles.append((side, extract_neighbors(star, node_id, config.limits, config.selection_seed)))
        return bundles


def _verbalize_bundles(
    source: _LocalSource | _RemoteSource,
    linkage: PairLinkage,
    bundles: list[tuple[str, StructureBundle]],
    config: ExperimentConfig,
) -> GraphContext:
    kind = config.structure
    t = config.templates
    if not bundles:
        return empty_context(kind)
    if kind is StructureKind.NN:
        contexts = []
        for _side, bundle in bundles:
            x = source.node(bundle.pair[0])
            if config.nn_include_labels:
                contexts.append(verbalize_neighbors_labeled(x, bundle, t))
            else:
                contexts.append(verbalize_neighbors(x, bundle, t))
        return combine_contexts(contexts)
    _side, bundle = bundles[0]
    x = source.node(bundle.pair[0])
    y = source.node(bundle.pair[1])
    if kind is StructureKind.CNN:
        return verbalize_common_neighbors(x, y, bundle, t)
    return verbalize_metapath(x, y, bundle, t)


def _link_remote(
    instances: list[Instance],
    endpoint: RemoteEndpoint,
    cache: QueryCache,
    overrides: dict[str, str],
) -> list[PairLinkage]:
    resolved: dict[str, tuple[str | None, str]] = {}

    def resolve(name: str) -> tuple[str | None, str]:
        if name not in resolved:
            candidates = resolve_entity(endpoint, cache, name)
            if candidates:
                entity_id, label, _description = candidates[0]
                method = EXACT if label.casefold() == name.casefold() else NORMALIZED
                resolved[name] = (entity_id, method)
            elif name in overrides:
                resolved[name] = (overrides[name], MANUAL_OVERRIDE)
            else:
                resolved[name] = (None, UNRESOLVED)
        return resolved[name]

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


# --- the run itself ---


def run_experiment(
    config: ExperimentConfig, offline: bool = False, until: str = "eval"
) -> Path:
    """Execute the pipeline through ``until`` (a STAGES name) and write artifacts.

    Returns the output directory. Stage failures are wrapped in StageError
    with the failing stage's name.
    """
    if until not in STAGES:
        raise ConfigError(f"unknown stage {until!r}; expected one of {STAGES}")
    validate_config(config)
    last = STAGES.index(until)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def wants(stage: str) -> bool:
        return STAGES.index(stage) <= last

    # ingest
    instances: list[Instance] = []
    source: _LocalSource | _RemoteSource
    try:
        instances = load_dataset_jsonl(config.dataset)
        if config.kg_kind in LOCAL_KG_KINDS:
            loader = load_hetionet_json if config.kg_kind == "hetionet_json" else load_edge_list_jsonl
            kg, report = loader(config.kg_path)
            source = _LocalSource(kg)
            _write_json(out / "ingest_report.json", _report_dict(report))
        else:
            endpoint = RemoteEndpoint(
                **{
                    k: v
                    for k, v in {
                        "sparql_url": config.sparql_url,
                        "entity_api_url": config.entity_api_url,
                    }.items()
                    if v is not None
                }
            )
            policy = CachePolicy.READ_ONLY if offline else CachePolicy.READ_WRITE
            cache = QueryCache(root_dir=Path(config.cache_dir), policy=policy)
            source = _RemoteSource(endpoint, cache)
    except KgPromptError as exc:
        raise StageError("ingest", str(exc)) from exc
    if not wants("link"):
        return _finish(out, config)

    # link
    try:
        overrides = load_overrides(config.overrides_path) if config.overrides_path else {}
        if isinstance(source, _LocalSource):
            linkages = link_pairs(instances, source.kg, overrides)
        else:
            linkages = _link_remote(instances, source.endpoint, source.cache, overrides)
        _write_jsonl(out / "linkage.jsonl", [l.to_dict() for l in linkages])
    except KgPromptError as exc:
        raise StageError("link", str(exc)) from exc
    if not wants("extract"):
        return _finish(out, config)

    # extract
    per_instance_bundles: dict[str, list[tuple[str, StructureBundle]]] = {}
    try:
        bundle_records = []
        for linkage in linkages:
            bundles = source.extract(linkage, config)
            per_instance_bundles[linkage.instance_id] = bundles
            for side, bundle in bundles:
                bundle_records.append(_bundle_record(linkage.instance_id, side, bundle))
        _write_jsonl(out / "bundles.jsonl", bundle_records)
    except KgPromptError as exc:
        raise StageError("extract", str(exc)) from exc
    if not wants("verbalize"):
        return _finish(out, config)

    # verbalize
    contexts: dict[str, GraphContext] = {}
    try:
        context_records = []
        for linkage in linkages:
            context = _verbalize_bundles(
                source, linkage, per_instance_bundles[linkage.instance_id], config
            )
            contexts[linkage.instance_id] = context
            context_records.append(
                {
                    "instance_id": linkage.instance_id,
                    "kind": context.kind.value,
                    "text": context.text,
                    "empty": context.empty,
                    "source_nodes": list(context.source_nodes),
                }
            )
        _write_jsonl(out / "contexts.jsonl", context_records)
    except KgPromptError as exc:
        raise StageError("verbalize", str(exc)) from exc
    if not wants("build-prompts"):
        return _finish(out, config)

    # build-prompts
    prompts_by_id: dict[str, PromptInstance] = {}
    try:
        for instance in instances:
            prompt = build_prompt(
                instance,
                contexts[instance.instance_id],
                (instance.e1, instance.e2),
                config.architecture,
                config.label_mapping,
                mask_token=config.mask_token,
            )
            prompts_by_id[instance.instance_id] = truncate_prompt(prompt, config.truncation)
        export_prompts_jsonl([prompts_by_id[i.instance_id] for i in instances], out / "prompts.jsonl")
    except KgPromptError as exc:
        raise StageError("build-prompts", str(exc)) from exc
    if not wants("split"):
        return _finish(out, config)

    # split
    try:
        plan = make_fold_plan(instances, config.n_folds, config.fold_seed, config.fold_stratified)
        folds = kfold_split(instances, plan)
        _write_json(out / "fold_plan.json", plan.to_dict())
        for i, (train_ids, test_ids) in enumerate(folds):
            fold_dir = out / "folds" / f"fold_{i}"
            fold_dir.mkdir(parents=True, exist_ok=True)
            sample = sample_few_shot(train_ids, instances, config.few_shot)
            export_prompts_jsonl([prompts_by_id[s] for s in sample], fold_dir / "few_shot.jsonl")
            export_prompts_jsonl([prompts_by_id[t] for t in test_ids], fold_dir / "test_prompts.jsonl")
    except KgPromptError as exc:
        raise StageError("split", str(exc)) from exc
    if not wants("predict") or config.backend_kind is None:
        return _finish(out, config)

    # predict
    try:
        for i, (_train_ids, test_ids) in enumerate(folds):
            fold_dir = out / "folds" / f"fold_{i}"
            requests_for_fold = [
                request_for_prompt(prompts_by_id[t], config.label_mapping) for t in test_ids
            ]
            if config.backend_kind == "mock":
                records = [
                    predict_mock(r, config.label_mapping, config.mock_seed)
                    for r in requests_for_fold
                ]
            else:
                endpoint = HttpEndpoint(
                    base_url=config.http_base_url,
                    timeout=config.http_timeout,
                    max_retries=config.http_max_retries,
                    backoff=config.http_backoff,
                    max_in_flight=config.http_max_in_flight,
                )
                records = predict_http_batch(endpoint, requests_for_fold, config.label_mapping)
            write_predictions_jsonl(records, fold_dir / "predictions.jsonl")
    except KgPromptError as exc:
        raise StageError("predict", str(exc)) from exc
    if not wants("eval"):
        return _finish(out, config)

    # eval
    try:
        golds = {inst.instance_id: inst.label for inst in instances}
        fold_metrics: list[Metrics] = []
        for i in range(len(folds)):
            fold_dir = out / "folds" / f"fold_{i}"
            records = read_predictions_jsonl(fold_dir / "predictions.jsonl")
            metrics = compute_metrics(records, golds)
            fold_metrics.append(metrics)
            _write_json(fold_dir / "metrics.json", metrics.to_dict())
        fold_report = aggregate_folds(fold_metrics)
        _write_json(out / "report.json", fold_report.to_dict())
        (out / "report.txt").write_text(format_report(fold_report), encoding="utf-8")
    except KgPromptError as exc:
        raise StageError("eval", str(exc)) from exc

    return _finish(out, config)


def _report_dict(report: IngestReport) -> dict:
    return {
        "nodes_loaded": report.nodes_loaded,
        "edges_loaded": report.edges_loaded,
        "duplicates_rejected": report.duplicates_rejected,
        "warnings": list(report.warnings),
    }


def _finish(out: Path, config: ExperimentConfig) -> Path:
    artifacts = {}
    for path in sorted(out.rglob("*")):
        if path.is_file() and path.name != "manifest.json":
            artifacts[str(path.relative_to(out))] = _sha256_file(path)
    manifest = {
        "config_hash": config.config_hash(),
        "config": config.to_canonical_dict(),
        "seeds": {
            "fold_seed": config.fold_seed,
            "few_shot_seed": config.few_shot.seed,
            "selection_seed": config.selection_seed,
            **({"mock_seed": config.mock_seed} if config.backend_kind == "mock" else {}),
        },
        "artifacts": artifacts,
    }
    _write_json(out / "manifest.json", manifest)
    return out
