"""Boot the real server in a subprocess and replay the recorded suite over
an actual socket, exactly as a primary-side client would."""

from __future__ import annotations

import socket
import subprocess
import sys
import time

import httpx
import pytest


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture(scope="module")
def live_url():
    port = free_port()
    proc = subprocess.Popen(
        [sys.executable, "-m", "crpse_provider", "--port", str(port)],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
    )
    url = f"http://127.0.0.1:{port}"
    try:
        deadline = time.monotonic() + 20.0
        last_error: Exception | None = None
        while time.monotonic() < deadline:
            if proc.poll() is not None:
                out = proc.stdout.read().decode() if proc.stdout else ""
                raise RuntimeError(f"server exited early: {out}")
            try:
                response = httpx.post(f"{url}/v1/nlp", json={"v": 1, "op": "health"}, timeout=2.0)
                if response.status_code == 200:
                    break
            except httpx.HTTPError as exc:
                last_error = exc
            time.sleep(0.1)
        else:
            raise RuntimeError(f"server never became healthy: {last_error}")
        yield url
    finally:
        proc.terminate()
        proc.wait(timeout=10)


def test_live_server_passes_recorded_suite(live_url, suite):
    for case in suite["cases"]:
        response = httpx.post(f"{live_url}/v1/nlp", json=case["request"], timeout=10.0)
        assert response.status_code == 200
        assert response.json() == case["response"], case["request"]


def test_live_embed_bytes_deterministic(live_url):
    request = {"v": 1, "op": "embed", "text": "socket-level determinism probe"}
    first = httpx.post(f"{live_url}/v1/nlp", json=request, timeout=10.0)
    second = httpx.post(f"{live_url}/v1/nlp", json=request, timeout=10.0)
    assert first.content == second.content


def test_live_health_matches_vector_dimension(live_url):
    health = httpx.post(f"{live_url}/v1/nlp", json={"v": 1, "op": "health"}, timeout=10.0).json()
    embed = httpx.post(
        f"{live_url}/v1/nlp", json={"v": 1, "op": "embed", "text": "probe"}, timeout=10.0
    ).json()
    assert len(embed["vector"]) == health["dim"]


def test_consumer_client_agrees_with_stub(live_url, suite):
    """The consumer-side client must behave identically whether its
    transport is the recorded stub or the live service."""
    crpse_provider_client = pytest.importorskip("crpse.provider")
    live = crpse_provider_client.ProviderClient(live_url)
    stub = crpse_provider_client.ProviderClient(
        transport=crpse_provider_client.StubTransport(suite["cases"])
    )
    assert live.health() == stub.health()
    for case in suite["cases"]:
        op = case["request"]["op"]
        text = case["request"].get("text")
        if op == "extract":
            assert live.extract(text) == stub.extract(text)
        elif op == "embed":
            assert (live.embed(text) == stub.embed(text)).all()
