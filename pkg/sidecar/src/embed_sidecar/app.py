"""HTTP surface of the embedding service.

The encoder loads in a background thread so the port binds immediately;
/health answers 503 until the load finishes, then 200. Vectors for
repeated texts are served from an in-process cache, which guarantees
that the same text maps to the same vector for the life of the process
and spares the encoder redundant work.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .config import SidecarConfig
from .encoder import SbertEncoder

CACHE_LIMIT = 65536


class _ServiceState:
    """Runtime state shared by the route handlers."""

    def __init__(self, config: SidecarConfig):
        self.config = config
        self.encoder = None
        self.load_error: str | None = None
        self.lock = threading.Lock()
        self.cache: OrderedDict[str, list[float]] = OrderedDict()


def _load_encoder(state: _ServiceState, factory) -> None:
    try:
        encoder = factory()
    except Exception as exc:
        state.load_error = f"{type(exc).__name__}: {exc}"
    else:
        state.encoder = encoder


def _unavailable(state: _ServiceState) -> JSONResponse:
    if state.load_error is not None:
        return JSONResponse(
            status_code=503,
            content={"status": "error", "detail": state.load_error},
        )
    return JSONResponse(status_code=503, content={"status": "loading"})


def _bad_request(message: str) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": message})


def _embed_cached(state: _ServiceState, encoder, texts: list[str]) -> list[list[float]]:
    """One vector per text, in order; repeats come from the process cache.

    Encoding runs under the state lock, so concurrent requests never race
    on the cache and a text is encoded at most once per process (up to
    cache eviction).
    """
    with state.lock:
        pending: list[str] = []
        seen: set[str] = set()
        for text in texts:
            if text not in state.cache and text not in seen:
                pending.append(text)
                seen.add(text)
        if pending:
            vectors = np.asarray(encoder.encode(pending), dtype=np.float32)
            if vectors.shape != (len(pending), encoder.dim):
                raise RuntimeError(
                    f"encoder returned shape {tuple(vectors.shape)} "
                    f"for {len(pending)} texts of dimension {encoder.dim}"
                )
            for text, vec in zip(pending, vectors):
                state.cache[text] = [float(x) for x in vec]
        rows = []
        for text in texts:
            state.cache.move_to_end(text)
            rows.append(state.cache[text])
        while len(state.cache) > CACHE_LIMIT:
            state.cache.popitem(last=False)
    return rows


def create_app(
    config: SidecarConfig | None = None,
    encoder=None,
    encoder_factory=None,
) -> FastAPI:
    """Build the ASGI app.

    Pass ``encoder`` to install a ready encoder up front, or
    ``encoder_factory`` to control what the background load constructs.
    With neither, the configured checkpoint loads on startup.
    """
    config = config or SidecarConfig()
    state = _ServiceState(config)
    if encoder is not None:
        state.encoder = encoder
    factory = encoder_factory or (lambda: SbertEncoder(config.model))

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if state.encoder is None:
            threading.Thread(
                target=_load_encoder, args=(state, factory), daemon=True
            ).start()
        yield

    app = FastAPI(lifespan=lifespan, docs_url=None, redoc_url=None, openapi_url=None)

    @app.get("/health")
    def health():
        if state.encoder is not None:
            return {"status": "ok"}
        return _unavailable(state)

    @app.get("/info")
    def info():
        encoder = state.encoder
        if encoder is None:
            return _unavailable(state)
        return {"model": config.model, "dim": encoder.dim}

    @app.post("/embed")
    async def embed(request: Request):
        encoder = state.encoder
        if encoder is None:
            return _unavailable(state)
        try:
            body = await request.json()
        except Exception:
            return _bad_request("body must be a JSON object")
        if not isinstance(body, dict) or not isinstance(body.get("texts"), list):
            return _bad_request('body must be {"texts": [...]} with a list of strings')
        texts = body["texts"]
        if len(texts) == 0:
            return _bad_request("texts must not be empty")
        if len(texts) > config.max_batch:
            return _bad_request(
                f"batch of {len(texts)} exceeds the limit of {config.max_batch}"
            )
        for i, text in enumerate(texts):
            if not isinstance(text, str):
                return _bad_request(f"texts[{i}] is not a string")
            if text == "":
                return _bad_request(f"texts[{i}] is empty")
        try:
            rows = _embed_cached(state, encoder, texts)
        except Exception as exc:
            return JSONResponse(
                status_code=500,
                content={"detail": f"encoder failure: {type(exc).__name__}: {exc}"},
            )
        return {"dim": encoder.dim, "embeddings": rows}

    return app
