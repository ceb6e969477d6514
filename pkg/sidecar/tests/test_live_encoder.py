"""Release checks against the real pretrained encoder.

Everything here needs the pinned checkpoint, which downloads on first
use. When that download fails (an offline host) the whole module skips
with the underlying error rather than failing: the contract half of the
suite still runs against stub encoders.

Each release check prints one [PASS] or [FAIL] line.
"""

import csv
import json
import os
import subprocess
import threading
import time

import httpx
import numpy as np
import pytest

from embed_sidecar import DEFAULT_MODEL, SbertEncoder, SidecarConfig, create_app

os.environ.setdefault("HF_HUB_DOWNLOAD_TIMEOUT", "15")

# The worked example of the engine's own test corpus: five real
# call-centre rows, five crops, five topics.
FIVE_ROWS = [
    (
        "Garlic",
        "How to control fungal attack in garlic",
        "Spray to mencozeb carbendazim 35-40 grampump",
    ),
    (
        "Onion",
        "Want to know how to increase size and production in onion crop",
        "To increase size and production in onion crop n : p : k 0:52:34 1 kg at per acer",
    ),
    (
        "Wheat",
        "Fungal attack in  wheat  crop",
        "Dear farmer spray of hexaconazole 5 ec 250-400 mlacre or 20mlpump and "
        "streptocyclin 2 gram at 15 liter of water in wheat crop",
    ),
    (
        "Cotton Kapas",
        "Control of pink bollworm of cotton",
        "To control the pink bollworm of cotton use pheromon and light",
    ),
    (
        "Chillies",
        "Varieties of chilli",
        "Varieties of chilli -agni -jwala sankeshwari-32 tejswini sitara phule "
        "jyoti pant c agnirekha",
    ),
]

CROPS = ["garlic", "onion", "wheat", "cotton", "cotton kapas", "chilli", "chillies"]


def _cosine(u, v):
    return float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))


@pytest.fixture(scope="module")
def live_encoder():
    try:
        return SbertEncoder(DEFAULT_MODEL)
    except Exception as exc:
        pytest.skip(f"pretrained encoder unavailable: {type(exc).__name__}: {exc}")


@pytest.fixture(scope="module")
def live_server(live_encoder):
    """The service with the real encoder on a real localhost socket."""
    import uvicorn

    app = create_app(SidecarConfig(), encoder=live_encoder)
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 30
    while not server.started:
        if time.monotonic() > deadline:
            server.should_exit = True
            raise RuntimeError("embedding server did not start within 30 s")
        time.sleep(0.05)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)


@pytest.fixture
def check(capsys):
    """Print one [PASS]/[FAIL] line per release check, then enforce it."""

    def run(name, ok, detail):
        with capsys.disabled():
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"

    return run


class TestLiveRelease:
    def test_info_and_embed_agree_on_dimension(self, live_server, check):
        """/info reports the checkpoint's true width and every /embed
        vector has exactly that many components."""
        info = httpx.get(live_server + "/info", timeout=30).json()
        resp = httpx.post(
            live_server + "/embed",
            json={"texts": ["fertilizer dose", "sowing window"]},
            timeout=120,
        )
        rows = resp.json()["embeddings"]
        ok = (
            info["model"] == DEFAULT_MODEL
            and info["dim"] == 768
            and resp.status_code == 200
            and all(len(row) == info["dim"] for row in rows)
        )
        check(
            "dimension consistency",
            ok,
            f"info dim {info['dim']}, rows {[len(r) for r in rows]}",
        )

    def test_paraphrase_ranks_above_unrelated(self, live_server, check):
        """A paraphrase lands closer to its anchor than an unrelated query."""
        resp = httpx.post(
            live_server + "/embed",
            json={
                "texts": [
                    "fungal attack in wheat",
                    "fungus infection on wheat crop",
                    "tractor loan subsidy scheme",
                ]
            },
            timeout=120,
        )
        anchor, paraphrase, unrelated = np.asarray(
            resp.json()["embeddings"], dtype=np.float32
        )
        near = _cosine(anchor, paraphrase)
        far = _cosine(anchor, unrelated)
        check(
            "paraphrase separation",
            near > far,
            f"cos(anchor, paraphrase) {near:.4f} > cos(anchor, unrelated) {far:.4f}",
        )

    def test_identical_text_identical_vector(self, live_server, check):
        """Re-embedding the same text in a later request is bit-identical."""
        def fetch():
            resp = httpx.post(
                live_server + "/embed",
                json={"texts": ["late blight in potato"]},
                timeout=120,
            )
            return resp.json()["embeddings"][0]

        first, second = fetch(), fetch()
        check(
            "within-process determinism",
            first == second,
            f"two requests, {len(first)} components, exact match: {first == second}",
        )

    def test_query_engine_fit_and_query_through_sidecar(
        self, live_server, check, tmp_path
    ):
        """The query engine fits on the five-row corpus with this service
        as its embedder and answers the garlic query at rank 1."""
        corpus = tmp_path / "calls.csv"
        with open(corpus, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(("crop", "query", "answer"))
            writer.writerows(FIVE_ROWS)
        crops = tmp_path / "crops.txt"
        crops.write_text("\n".join(CROPS) + "\n", encoding="utf-8")
        artifact = tmp_path / "artifact"
        env = {**os.environ, "AGRIQRS_EMBED_ENDPOINT": live_server}

        fit = subprocess.run(
            [
                "agriqrs", "fit",
                "--corpus", str(corpus),
                "--crops", str(crops),
                "--out", str(artifact),
                "--min-size", "1",
                "--embedder", "service",
                "--endpoint", live_server,
                "--seed", "0",
            ],
            env=env, capture_output=True, text=True, timeout=600,
        )
        assert fit.returncode == 0, f"fit failed: {fit.stderr}"

        query = subprocess.run(
            [
                "agriqrs", "query",
                "--artifact", str(artifact),
                "--k", "1",
                "How", "to", "control", "fungal", "attack", "in", "garlic",
            ],
            env=env, capture_output=True, text=True, timeout=600,
        )
        assert query.returncode == 0, f"query failed: {query.stderr}"
        payload = json.loads(query.stdout)
        top = payload["answers"][0]
        ok = (
            top["rank"] == 1
            and top["answer"] == "Spray to mencozeb carbendazim 35-40 grampump"
        )
        check(
            "query engine integration",
            ok,
            f"rank {top['rank']} answer {top['answer']!r}",
        )
