"""Minimal HTTP front end over a fitted pipeline.

POST /query with {"text": ..., "k": int} answers a query; GET /health
reports liveness and the cluster count. Bad request bodies get 400,
queries the engine refuses get 422, unexpected faults get 500.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .errors import QueryError
from .pipeline import PipelineArtifact

DEFAULT_K = 5
_MAX_BODY = 1 << 20


def _make_handler(artifact: PipelineArtifact):
    class Handler(BaseHTTPRequestHandler):
        server_version = "agriqrs"

        def log_message(self, fmt, *args):  # stay quiet under test
            pass

        def _send(self, status: int, payload: dict):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path == "/health":
                self._send(200, {"status": "ok", "clusters": len(artifact.clusters)})
            else:
                self._send(404, {"error": f"unknown path {self.path}"})

        def do_POST(self):
            if self.path != "/query":
                self._send(404, {"error": f"unknown path {self.path}"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
            except ValueError:
                self._send(400, {"error": "bad Content-Length"})
                return
            if length <= 0 or length > _MAX_BODY:
                self._send(400, {"error": "request body required"})
                return
            try:
                body = json.loads(self.rfile.read(length).decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                self._send(400, {"error": f"invalid JSON body: {exc}"})
                return
            if not isinstance(body, dict) or not isinstance(body.get("text"), str):
                self._send(400, {"error": "body must be an object with a string 'text'"})
                return
            k = body.get("k", DEFAULT_K)
            if not isinstance(k, int) or isinstance(k, bool) or k < 1:
                self._send(400, {"error": "'k' must be an integer >= 1"})
                return
            try:
                result = artifact.query(body["text"], k=k)
            except QueryError as exc:
                self._send(422, {"error": str(exc)})
                return
            except Exception as exc:  # noqa: BLE001 - fault barrier
                self._send(500, {"error": f"internal error: {exc}"})
                return
            self._send(200, result.to_dict())

    return Handler


def make_server(artifact: PipelineArtifact, host: str = "127.0.0.1", port: int = 0):
    """Construct (not start) a threading HTTP server bound to host:port."""
    return ThreadingHTTPServer((host, port), _make_handler(artifact))


def serve_forever(artifact: PipelineArtifact, host: str, port: int):
    server = make_server(artifact, host, port)
    print(f"serving on http://{server.server_address[0]}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def start_background(artifact: PipelineArtifact, host: str = "127.0.0.1", port: int = 0):
    """Start a server on a daemon thread; returns (server, base_url)."""
    server = make_server(artifact, host, port)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    addr, bound = server.server_address[0], server.server_address[1]
    return server, f"http://{addr}:{bound}"
