"""Wire contract of the embedding service, checked against stub encoders."""

import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from conftest import FailingEncoder, StubEncoder
from embed_sidecar import DEFAULT_MODEL, SidecarConfig, create_app
from embed_sidecar.cli import build_parser, main


class TestSidecarConfig:
    def test_defaults(self):
        """The default config pins the 768-dimension checkpoint by exact name."""
        config = SidecarConfig()
        assert config.model == DEFAULT_MODEL
        assert DEFAULT_MODEL == "sentence-transformers/all-mpnet-base-v2"
        assert config.bind == "127.0.0.1:8901"
        assert config.max_batch == 128

    @pytest.mark.parametrize("bad", [0, -1, -128])
    def test_rejects_nonpositive_max_batch(self, bad):
        with pytest.raises(ValueError, match="max_batch"):
            SidecarConfig(max_batch=bad)

    def test_rejects_empty_model(self):
        with pytest.raises(ValueError, match="model"):
            SidecarConfig(model="")

    def test_bind_splits_into_host_and_port(self):
        config = SidecarConfig(bind="0.0.0.0:9000")
        assert config.host == "0.0.0.0"
        assert config.port == 9000

    @pytest.mark.parametrize("bad", ["8080", "localhost:", ":9", "host:port", "host:70000"])
    def test_rejects_malformed_bind(self, bad):
        with pytest.raises(ValueError, match="bind"):
            SidecarConfig(bind=bad)


class TestEmbedEndpoint:
    def test_single_text_shape(self, client):
        """One text yields one vector of the advertised dimension."""
        resp = client.post("/embed", json={"texts": ["fertilizer dose"]})
        assert resp.status_code == 200
        body = resp.json()
        assert body["dim"] == 8
        assert len(body["embeddings"]) == 1
        assert len(body["embeddings"][0]) == 8

    def test_vectors_match_encoder_exactly(self, client, stub):
        """The service returns the encoder's floats untouched; the JSON
        round trip through float64 is exact for float32 values."""
        resp = client.post("/embed", json={"texts": ["wheat rust"]})
        got = np.asarray(resp.json()["embeddings"][0], dtype=np.float32)
        np.testing.assert_array_equal(got, stub.vector("wheat rust"))

    def test_order_preserved(self, client, stub):
        """Vectors come back in request order, one per text."""
        texts = ["gamma", "alpha", "beta"]
        resp = client.post("/embed", json={"texts": texts})
        rows = resp.json()["embeddings"]
        assert len(rows) == 3
        for text, row in zip(texts, rows):
            np.testing.assert_array_equal(
                np.asarray(row, dtype=np.float32), stub.vector(text)
            )

    def test_vectors_are_unnormalized(self, client, stub):
        """No normalization happens on the way out: the stub's vectors
        have norms far from 1 and arrive with those norms intact."""
        resp = client.post("/embed", json={"texts": ["sowing window"]})
        row = np.asarray(resp.json()["embeddings"][0], dtype=np.float64)
        norm = float(np.linalg.norm(row))
        assert abs(norm - 1.0) > 0.5
        assert norm == pytest.approx(float(np.linalg.norm(stub.vector("sowing window"))))

    def test_repeat_in_one_request_identical(self, client):
        """The same text twice in one batch gives bitwise-equal rows."""
        resp = client.post("/embed", json={"texts": ["x", "y", "x"]})
        rows = resp.json()["embeddings"]
        assert rows[0] == rows[2]
        assert rows[0] != rows[1]

    def test_repeat_across_requests_identical(self, client):
        """The same text in two requests gives bitwise-equal rows."""
        first = client.post("/embed", json={"texts": ["drip irrigation"]})
        second = client.post("/embed", json={"texts": ["drip irrigation"]})
        assert first.json()["embeddings"][0] == second.json()["embeddings"][0]

    def test_repeats_served_from_process_cache(self, client, stub):
        """A text already embedded in this process never reaches the
        encoder again, and repeats within a batch collapse to one call."""
        client.post("/embed", json={"texts": ["a", "a", "b"]})
        assert stub.calls == [["a", "b"]]
        client.post("/embed", json={"texts": ["b", "a"]})
        assert stub.calls == [["a", "b"]]
        client.post("/embed", json={"texts": ["b", "c"]})
        assert stub.calls == [["a", "b"], ["c"]]

    def test_dim_matches_info(self, client):
        """Every /embed vector has exactly the /info dimension."""
        dim = client.get("/info").json()["dim"]
        rows = client.post("/embed", json={"texts": ["a", "b"]}).json()["embeddings"]
        assert all(len(row) == dim for row in rows)

    @pytest.mark.parametrize(
        "payload,fragment",
        [
            ({"texts": []}, "must not be empty"),
            ({"texts": ["a", "b", "c", "d", "e"]}, "limit of 4"),
            ({"texts": ["a", "", "c"]}, "texts[1] is empty"),
            ({"texts": ["a", 7]}, "texts[1] is not a string"),
            ({"texts": "just one string"}, "list of strings"),
            ({"words": ["a"]}, "list of strings"),
            ([1, 2], "list of strings"),
        ],
    )
    def test_bad_requests_are_400(self, client, payload, fragment):
        """Empty lists, oversize batches, empty texts, and wrongly shaped
        bodies are all client errors with a diagnostic detail."""
        resp = client.post("/embed", json=payload)
        assert resp.status_code == 400
        assert fragment in resp.json()["detail"]

    def test_unparseable_body_is_400(self, client):
        resp = client.post(
            "/embed",
            content=b"{not json",
            headers={"Content-Type": "application/json"},
        )
        assert resp.status_code == 400
        assert "JSON" in resp.json()["detail"]

    def test_encoder_failure_is_500(self):
        """An exception inside the model maps to a server error, not a crash."""
        config = SidecarConfig(model="failing-encoder")
        with TestClient(create_app(config, encoder=FailingEncoder())) as client:
            resp = client.post("/embed", json={"texts": ["anything"]})
        assert resp.status_code == 500
        assert "encoder failure" in resp.json()["detail"]
        assert "weights corrupted" in resp.json()["detail"]


class TestLifecycle:
    def _poll(self, client, path, want_status, timeout=10.0):
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            resp = client.get(path)
            if resp.status_code == want_status:
                return resp
            time.sleep(0.01)
        return resp

    def test_health_reports_loading_then_ok(self):
        """/health answers 503 while the model loads and 200 afterwards."""
        gate = threading.Event()

        def factory():
            gate.wait(timeout=30)
            return StubEncoder()

        app = create_app(SidecarConfig(model="stub-encoder"), encoder_factory=factory)
        with TestClient(app) as client:
            before = client.get("/health")
            assert before.status_code == 503
            assert before.json()["status"] == "loading"
            gate.set()
            after = self._poll(client, "/health", 200)
            assert after.status_code == 200
            assert after.json() == {"status": "ok"}

    def test_embed_and_info_unavailable_while_loading(self):
        """Endpoints that need the encoder answer 503 until it exists."""
        gate = threading.Event()

        def factory():
            gate.wait(timeout=30)
            return StubEncoder()

        app = create_app(SidecarConfig(model="stub-encoder"), encoder_factory=factory)
        try:
            with TestClient(app) as client:
                assert client.post("/embed", json={"texts": ["a"]}).status_code == 503
                assert client.get("/info").status_code == 503
        finally:
            gate.set()

    def test_load_failure_reported_on_health(self):
        """A failed load leaves the service unavailable, with the cause."""

        def factory():
            raise RuntimeError("checkpoint missing")

        app = create_app(SidecarConfig(model="stub-encoder"), encoder_factory=factory)
        with TestClient(app) as client:
            deadline = time.monotonic() + 10
            while time.monotonic() < deadline:
                resp = client.get("/health")
                if resp.json().get("status") == "error":
                    break
                time.sleep(0.01)
            assert resp.status_code == 503
            assert resp.json()["status"] == "error"
            assert "checkpoint missing" in resp.json()["detail"]

    def test_injected_encoder_is_ready_immediately(self, client):
        """With an encoder installed up front there is no loading window."""
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok"}

    def test_info_reports_configured_model_and_dim(self, client):
        assert client.get("/info").json() == {"model": "stub-encoder", "dim": 8}


class TestRouting:
    def test_unknown_route_is_404(self, client):
        assert client.get("/nope").status_code == 404
        assert client.post("/embeddings", json={}).status_code == 404

    def test_wrong_method_is_405(self, client):
        assert client.get("/embed").status_code == 405
        assert client.post("/health").status_code == 405


class TestCli:
    def test_parser_defaults(self):
        args = build_parser().parse_args([])
        assert args.model == DEFAULT_MODEL
        assert args.bind == "127.0.0.1:8901"
        assert args.max_batch == 128

    def test_parser_accepts_overrides(self):
        args = build_parser().parse_args(
            ["--model", "some/other-encoder", "--bind", "0.0.0.0:9100", "--max-batch", "16"]
        )
        assert args.model == "some/other-encoder"
        assert args.bind == "0.0.0.0:9100"
        assert args.max_batch == 16

    @pytest.mark.parametrize("argv", [["--bind", "nope"], ["--max-batch", "0"]])
    def test_bad_flags_exit_with_usage_error(self, argv, capsys):
        with pytest.raises(SystemExit) as exc_info:
            main(argv)
        assert exc_info.value.code == 2
        assert "error" in capsys.readouterr().err
