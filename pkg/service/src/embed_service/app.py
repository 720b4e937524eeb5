"""HTTP front end: POST /embed and GET /health over a bounded worker pool.

Requests are stateless and the encoder is read-only, so handlers run
concurrently on a fixed-size pool. server.encoder is None until the model
has loaded; both endpoints answer 503 in that window.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from http.server import BaseHTTPRequestHandler, HTTPServer
from socketserver import ThreadingMixIn

from .encoder import DEFAULT_MODEL, InputError, LengthBudgetError, StubEncoder


class EmbedHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def _send(self, code: int, doc: dict) -> None:
        body = json.dumps(doc).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:  # noqa: N802 (http.server naming)
        if self.path != "/health":
            self._send(404, {"error": f"no such path {self.path!r}"})
            return
        encoder = self.server.encoder
        if encoder is None:
            self._send(503, {"status": "loading"})
            return
        self._send(200, {"status": "ok", "model_id": encoder.model_id, "d": encoder.d})

    def do_POST(self) -> None:  # noqa: N802
        if self.path != "/embed":
            self._send(404, {"error": f"no such path {self.path!r}"})
            return
        encoder = self.server.encoder
        if encoder is None:
            self._send(503, {"error": "model not loaded yet"})
            return
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length)
        try:
            doc = json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError):
            self._send(400, {"error": "request body is not valid JSON"})
            return
        if not isinstance(doc, dict) or "tokens" not in doc:
            self._send(400, {"error": 'request body must be an object with a "tokens" field'})
            return
        try:
            result = encoder.encode(doc["tokens"], bool(doc.get("mask_tokens_are_reserved", True)))
        except LengthBudgetError as exc:
            self._send(422, {"error": str(exc)})
            return
        except InputError as exc:
            self._send(400, {"error": str(exc)})
            return
        self._send(200, result.to_dict())

    def log_message(self, fmt, *args) -> None:  # quiet: the CLI owns stdout
        pass


class BoundedHTTPServer(ThreadingMixIn, HTTPServer):
    daemon_threads = True

    def __init__(self, address, handler, encoder: StubEncoder | None, max_workers: int = 8) -> None:
        super().__init__(address, handler)
        self.encoder = encoder
        self._pool = ThreadPoolExecutor(max_workers=max_workers)

    def process_request(self, request, client_address) -> None:
        self._pool.submit(self.process_request_thread, request, client_address)

    def server_close(self) -> None:
        super().server_close()
        self._pool.shutdown(wait=False)


def make_server(
    model_id: str = DEFAULT_MODEL,
    port: int = 0,
    host: str = "127.0.0.1",
    max_workers: int = 8,
    loaded: bool = True,
) -> BoundedHTTPServer:
    """Build a server; port 0 binds an ephemeral port (see server_address).

    loaded=False serves the pre-load state where every endpoint answers 503.
    """
    encoder = StubEncoder(model_id) if loaded else None
    return BoundedHTTPServer((host, port), EmbedHandler, encoder=encoder, max_workers=max_workers)
