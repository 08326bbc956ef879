"""Client for the optional NLP sidecar service.

Protocol: POST <base>/v1/nlp with {"v": 1, "op": "extract"|"embed"|"health",
"text": str}; responses carry {"v": 1, ...} with "entities", "vector", or
health fields. A line-delimited batch variant lives at /v1/nlp/batch.

Tests run against a recorded-response stub transport; the live sidecar must
answer the same fixture suite identically.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable

import numpy as np
import requests

from crpse.ranking import EmbeddingProvider
from crpse.segment import EntityExtractor, ExtractedSpan

PROTOCOL_VERSION = 1
ENDPOINT_PATH = "/v1/nlp"
BATCH_ENDPOINT_PATH = "/v1/nlp/batch"

Transport = Callable[[dict], dict]


class ProviderError(RuntimeError):
    """The provider was unreachable or answered outside the protocol."""


class HttpTransport:
    """Default transport: JSON POST against the sidecar endpoint."""

    def __init__(self, base_url: str, timeout: float = 15.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def __call__(self, request: dict) -> dict:
        try:
            response = requests.post(
                self.base_url + ENDPOINT_PATH, json=request, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise ProviderError(f"provider request failed: {exc}") from exc
        if response.status_code != 200:
            raise ProviderError(f"provider returned HTTP {response.status_code}: {response.text}")
        return response.json()


class StubTransport:
    """Replays recorded request/response pairs; unknown requests raise."""

    def __init__(self, cases: list[dict]) -> None:
        self._responses = {
            json.dumps(case["request"], sort_keys=True): case["response"] for case in cases
        }

    def __call__(self, request: dict) -> dict:
        key = json.dumps(request, sort_keys=True)
        if key not in self._responses:
            raise ProviderError(f"no recorded response for request: {key}")
        return self._responses[key]


def load_protocol_fixtures(path: str | Path) -> dict:
    """Read the shared fixture suite: {"cases": [{"request", "response"}]}."""
    return json.loads(Path(path).read_text(encoding="utf-8"))


class ProviderClient:
    def __init__(self, base_url: str = "", transport: Transport | None = None) -> None:
        if transport is None:
            if not base_url:
                raise ValueError("provider client needs a base_url or an explicit transport")
            transport = HttpTransport(base_url)
        self._transport = transport

    def request(self, op: str, text: str | None = None) -> dict:
        message: dict = {"v": PROTOCOL_VERSION, "op": op}
        if text is not None:
            message["text"] = text
        response = self._transport(message)
        if not isinstance(response, dict):
            raise ProviderError("provider response is not an object")
        if response.get("v") != PROTOCOL_VERSION:
            raise ProviderError(f"unsupported provider protocol version: {response.get('v')!r}")
        if "error" in response:
            raise ProviderError(f"provider error: {response['error']}")
        return response

    def health(self) -> dict:
        return self.request("health")

    def extract(self, text: str) -> list[ExtractedSpan]:
        response = self.request("extract", text)
        spans = []
        for entity in response.get("entities", []):
            spans.append(
                ExtractedSpan(
                    surface=entity["surface"], start=entity["start"], end=entity["end"]
                )
            )
        return spans

    def embed(self, text: str) -> np.ndarray:
        response = self.request("embed", text)
        vector = response.get("vector")
        if not isinstance(vector, list):
            raise ProviderError("embed response carries no vector")
        return np.asarray(vector, dtype=np.float64)


class RemoteExtractor(EntityExtractor):
    """EntityExtractor backed by the sidecar protocol."""

    def __init__(self, client: ProviderClient) -> None:
        self._client = client

    def extract(self, text: str) -> list[ExtractedSpan]:
        return self._client.extract(text)


class RemoteEmbedder(EmbeddingProvider):
    """EmbeddingProvider backed by the sidecar protocol; dimension comes
    from the health endpoint and is cached."""

    def __init__(self, client: ProviderClient) -> None:
        self._client = client
        self._dimension: int | None = None

    @property
    def dimension(self) -> int:
        if self._dimension is None:
            health = self._client.health()
            dim = health.get("dim")
            if not isinstance(dim, int) or dim < 1:
                raise ProviderError(f"provider health reports no usable dimension: {dim!r}")
            self._dimension = dim
        return self._dimension

    def embed(self, text: str) -> np.ndarray:
        vector = self._client.embed(text)
        if vector.shape != (self.dimension,):
            raise ProviderError(
                f"provider vector length {vector.shape[0]} does not match advertised {self.dimension}"
            )
        return vector
