from __future__ import annotations

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from crpse_provider.service import create_app

# The recorded request/response suite shared with the primary package's
# stub-transport tests; the live service must answer it identically.
FIXTURES = Path(__file__).resolve().parents[2] / "tests" / "fixtures" / "nlp_protocol_fixtures.json"


@pytest.fixture(scope="session")
def suite() -> dict:
    return json.loads(FIXTURES.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def client() -> TestClient:
    return TestClient(create_app())
