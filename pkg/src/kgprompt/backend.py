"""Inference backends: a small JSON-over-HTTP protocol and a local mock.

The HTTP protocol is one POST to ``/predict`` per request; the response
carries either a score per candidate label word or a generated text,
never both. The mock backend hashes (seed, prompt) into a label so the
whole pipeline and its metrics can be exercised offline and
deterministically.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import requests

from .dataset import LABELS
from .errors import NetworkError, ProtocolError, UnmappableOutputError
from .prompts import Architecture, LabelMapping, PromptInstance, unmap_label

_TRANSIENT_STATUSES = {429, 500, 502, 503, 504}


@dataclass(frozen=True)
class HttpEndpoint:
    base_url: str
    timeout: float = 10.0
    max_retries: int = 3
    backoff: float = 0.5
    max_in_flight: int = 1

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


@dataclass(frozen=True)
class InferenceRequest:
    prompt: str
    mask_token: str
    candidates: tuple[str, ...]
    architecture: Architecture
    request_id: str

    def __post_init__(self) -> None:
        if not self.candidates:
            raise ValueError("candidates must be non-empty")
        if len(set(self.candidates)) != len(self.candidates):
            raise ValueError("candidates must be distinct")
        if not self.request_id:
            raise ValueError("request_id must be non-empty")


@dataclass(frozen=True)
class InferenceResponse:
    request_id: str
    scores: dict[str, float] | None = None
    generated_text: str | None = None

    def __post_init__(self) -> None:
        if (self.scores is None) == (self.generated_text is None):
            raise ValueError("exactly one of scores/generated_text must be present")
        if self.scores is not None:
            for word, value in self.scores.items():
                if not isinstance(value, (int, float)) or not math.isfinite(value):
                    raise ValueError(f"score for {word!r} is not finite")


@dataclass(frozen=True)
class PredictionRecord:
    instance_id: str
    predicted: str
    score: float | None = None
    backend: str = ""

    def __post_init__(self) -> None:
        if self.predicted not in LABELS:
            raise ValueError(f"predicted label {self.predicted!r} not in {LABELS}")


def request_for_prompt(p: PromptInstance, mapping: LabelMapping) -> InferenceRequest:
    return InferenceRequest(
        prompt=p.prompt,
        mask_token=p.mask_token,
        candidates=mapping.candidates(),
        architecture=p.architecture,
        request_id=p.instance_id,
    )


def resolve_response(
    response: InferenceResponse, req: InferenceRequest, mapping: LabelMapping
) -> tuple[str, float | None]:
    """Turn a backend response into (class label, optional score).

    Score mode: argmax over the request's candidates, ties broken by
    candidate order. Text mode: the candidate whose word occurs earliest in
    the generated text (case-insensitive) wins; equal positions fall back
    to candidate order. Earliest-occurrence matters because one label word
    may contain another (e.g. "causal" inside "non-causal").
    """
    if response.scores is not None:
        best_word = None
        best_score = 0.0
        for word in req.candidates:
            if word not in response.scores:
                raise ProtocolError(f"response misses a score for candidate {word!r}")
            value = float(response.scores[word])
            if best_word is None or value > best_score:
                best_word, best_score = word, value
        assert best_word is not None
        return unmap_label(mapping, best_word), best_score

    haystack = (response.generated_text or "").lower()
    matches = []
    for order, word in enumerate(req.candidates):
        position = haystack.find(word.lower())
        if position >= 0:
            matches.append((position, order, word))
    if not matches:
        raise UnmappableOutputError(
            f"generated text {response.generated_text!r} contains no candidate label word"
        )
    _, _, word = min(matches)
    return unmap_label(mapping, word), None


def _parse_response_payload(payload: object, req: InferenceRequest) -> InferenceResponse:
    if not isinstance(payload, dict):
        raise ProtocolError("response body must be a JSON object")
    if "code" in payload and "message" in payload and "scores" not in payload and "generated_text" not in payload:
        raise ProtocolError(f"backend error {payload['code']}: {payload['message']}")
    if payload.get("request_id") != req.request_id:
        raise ProtocolError(
            f"response request_id {payload.get('request_id')!r} does not match {req.request_id!r}"
        )
    try:
        return InferenceResponse(
            request_id=payload["request_id"],
            scores=payload.get("scores"),
            generated_text=payload.get("generated_text"),
        )
    except (ValueError, KeyError) as exc:
        raise ProtocolError(f"malformed response: {exc}") from exc


def predict_http(
    endpoint: HttpEndpoint, req: InferenceRequest, mapping: LabelMapping
) -> PredictionRecord:
    """POST the request to ``<base_url>/predict`` and resolve the label.

    Transient failures (connection errors, 5xx, 429) are retried with
    exponential backoff up to ``max_retries`` additional attempts; anything
    else surfaces immediately as a protocol error.
    """
    url = endpoint.base_url.rstrip("/") + "/predict"
    body = {
        "prompt": req.prompt,
        "mask_token": req.mask_token,
        "candidates": list(req.candidates),
        "architecture": req.architecture.value,
        "request_id": req.request_id,
    }
    last_error: Exception | None = None
    for attempt in range(endpoint.max_retries + 1):
        if attempt:
            time.sleep(endpoint.backoff * 2 ** (attempt - 1))
        try:
            raw = requests.post(url, json=body, timeout=endpoint.timeout)
        except requests.RequestException as exc:
            last_error = exc
            continue
        if raw.status_code in _TRANSIENT_STATUSES:
            last_error = NetworkError(f"transient HTTP {raw.status_code} from {url}")
            continue
        try:
            payload = raw.json()
        except ValueError as exc:
            raise ProtocolError(f"response is not valid JSON: {exc}") from exc
        if raw.status_code != 200:
            if isinstance(payload, dict) and "message" in payload:
                raise ProtocolError(
                    f"backend error {payload.get('code', raw.status_code)}: {payload['message']}"
                )
            raise ProtocolError(f"unexpected HTTP {raw.status_code} from {url}")
        response = _parse_response_payload(payload, req)
        predicted, score = resolve_response(response, req, mapping)
        return PredictionRecord(
            instance_id=req.request_id, predicted=predicted, score=score, backend=endpoint.base_url
        )
    raise NetworkError(f"request to {url} failed after {endpoint.max_retries + 1} attempts: {last_error}")


def predict_http_batch(
    endpoint: HttpEndpoint, reqs: list[InferenceRequest], mapping: LabelMapping
) -> list[PredictionRecord]:
    """Predict a batch, preserving input order regardless of completion order."""
    if endpoint.max_in_flight == 1 or len(reqs) <= 1:
        return [predict_http(endpoint, r, mapping) for r in reqs]
    with ThreadPoolExecutor(max_workers=endpoint.max_in_flight) as pool:
        futures = [pool.submit(predict_http, endpoint, r, mapping) for r in reqs]
        return [f.result() for f in futures]


def predict_mock(req: InferenceRequest, mapping: LabelMapping, seed: int) -> PredictionRecord:
    """Deterministic offline prediction from a seeded hash of the prompt."""
    digest = hashlib.sha256(f"{seed}:{req.prompt}".encode("utf-8")).digest()
    index = int.from_bytes(digest[:8], "big") % len(req.candidates)
    predicted = unmap_label(mapping, req.candidates[index])
    return PredictionRecord(
        instance_id=req.request_id, predicted=predicted, score=None, backend=f"mock:{seed}"
    )


def write_predictions_jsonl(records: list[PredictionRecord], path: str | Path) -> int:
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in records:
            data: dict = {"instance_id": record.instance_id, "predicted": record.predicted}
            if record.score is not None:
                data["score"] = record.score
            data["backend"] = record.backend
            fh.write(json.dumps(data, ensure_ascii=False) + "\n")
    return len(records)
