"""Shared pieces: deterministic fake encoders and a client built on one."""

import hashlib

import numpy as np
import pytest
from fastapi.testclient import TestClient

from embed_sidecar import SidecarConfig, create_app


class StubEncoder:
    """Deterministic fake encoder: each text maps to a fixed vector.

    Vectors are deliberately far from unit length, so any normalization
    sneaking into the service would show up in the tests. Every encode
    call is recorded so tests can observe caching.
    """

    def __init__(self, dim=8):
        self.dim = dim
        self.model_name = "stub-encoder"
        self.calls: list[list[str]] = []

    def vector(self, text: str) -> np.ndarray:
        seed = int.from_bytes(
            hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little"
        )
        rng = np.random.default_rng(seed)
        return (rng.normal(size=self.dim) * 3.0).astype(np.float32)

    def encode(self, texts):
        self.calls.append(list(texts))
        return np.stack([self.vector(t) for t in texts])


class FailingEncoder:
    """Fake encoder whose forward pass always blows up."""

    dim = 8
    model_name = "failing-encoder"

    def encode(self, texts):
        raise RuntimeError("weights corrupted")


@pytest.fixture
def stub():
    return StubEncoder()


@pytest.fixture
def client(stub):
    config = SidecarConfig(model="stub-encoder", max_batch=4)
    with TestClient(create_app(config, encoder=stub)) as c:
        yield c
