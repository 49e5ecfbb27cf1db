"""Minimal HTTP service exposing price recommendations.

POST /v1/price takes a session record (JSON, label optional) and returns
the loaded policy's quote; GET /healthz reports liveness. Requests are
served against an immutable policy snapshot; swapping in a new model is a
single reference replacement, so in-flight readers are never disrupted.
"""

from __future__ import annotations

import json
import logging
import threading
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .errors import ParseError, SchemaMismatch
from .policies import PricingPolicy
from .session_io import session_from_dict

log = logging.getLogger(__name__)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def _reply(self, status: int, body: dict):
        blob = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(blob)))
        self.end_headers()
        self.wfile.write(blob)

    def do_GET(self):
        if self.path == "/healthz":
            self._reply(200, {"status": "ok"})
        else:
            self._reply(404, {"error": "not found"})

    def do_POST(self):
        if self.path != "/v1/price":
            self._reply(404, {"error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length) if length > 0 else b""
            try:
                obj = json.loads(raw.decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                self._reply(400, {"error": f"malformed request body: {exc}"})
                return
            try:
                session = session_from_dict(obj, line=1)
            except ParseError as exc:
                self._reply(422, {"error": exc.reason if hasattr(exc, "reason") else str(exc)})
                return
            policy: PricingPolicy = self.server.service.policy
            try:
                quote = policy.quote(session, np.random.default_rng(0))
            except SchemaMismatch as exc:
                self._reply(422, {"error": str(exc)})
                return
            body = {
                "recommended_price": quote.recommended_price,
                "policy": quote.policy_tag.value,
                "model_version": quote.model_version,
            }
            if quote.purchase_prob_estimate is not None:
                body["purchase_prob"] = quote.purchase_prob_estimate
            self._reply(200, body)
        except Exception:
            error_id = uuid.uuid4().hex
            log.exception("request %s failed", error_id)
            try:
                self._reply(500, {"error": "internal error", "error_id": error_id})
            except Exception:
                pass

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)


class PricingService:
    """Threaded HTTP server around one immutable policy snapshot."""

    def __init__(self, policy: PricingPolicy, host: str = "127.0.0.1", port: int = 0):
        self.policy = policy
        self._server = ThreadingHTTPServer((host, port), _Handler)
        self._server.service = self
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def swap_policy(self, policy: PricingPolicy) -> None:
        """Atomic snapshot replacement; readers see old or new, never a mix."""
        self.policy = policy

    def start_background(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        log.info("serving on %s:%d", *self.address)
        self._server.serve_forever()

    def shutdown(self) -> None:
        self._server.shutdown()
        if self._thread is not None:
            self._thread.join(timeout=5)
        self._server.server_close()


def serve(policy: PricingPolicy, host: str, port: int) -> PricingService:
    """Build a service bound to the address; caller decides how to run it."""
    return PricingService(policy, host=host, port=port)
