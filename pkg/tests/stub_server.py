"""In-process chat-completion stub with scriptable failure behaviors.

Behaviors:
  ok          -- fixed canned completion content
  oracle      -- parse the claim out of the target message, answer via the
                 offline audit-backed expert
  malformed   -- HTTP 200 with a non-JSON body
  bad_envelope-- HTTP 200 JSON lacking the choices structure
  unauthorized-- HTTP 401
  drop        -- close the first N connections without replying, then "ok"
                 (or "oracle" when oracle_after_drop is set)
"""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from claimtriage.claims import parse_claim_set
from claimtriage.expert import COPT_SHOTS, mock_expert


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_POST(self):
        server: StubExpertServer = self.server.stub  # type: ignore[attr-defined]
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length)
        try:
            payload = json.loads(body)
        except ValueError:
            payload = None
        with server.lock:
            server.requests.append(payload)
            server.in_flight += 1
            server.max_in_flight = max(server.max_in_flight, server.in_flight)
        try:
            if server.delay_s:
                time.sleep(server.delay_s)
            behavior = server.behavior
            if behavior == "drop":
                with server.lock:
                    if server.drops_remaining > 0:
                        server.drops_remaining -= 1
                        self.close_connection = True
                        self.connection.close()
                        return
                behavior = "oracle" if server.oracle_after_drop else "ok"
            if behavior == "unauthorized":
                self._reply(401, b"{}")
            elif behavior == "malformed":
                self._reply(200, b"this is not a completion")
            elif behavior == "bad_envelope":
                self._reply(200, json.dumps({"unexpected": True}).encode())
            elif behavior == "oracle":
                content = self._oracle_content(payload)
                self._reply(200, self._envelope(content))
            else:
                self._reply(200, self._envelope(server.content))
        finally:
            with server.lock:
                server.in_flight -= 1

    def _oracle_content(self, payload) -> str:
        message = payload["messages"][-1]["content"]
        text = message[len('Claim: "'):-1]
        return mock_expert(parse_claim_set(text)).raw

    @staticmethod
    def _envelope(content: str) -> bytes:
        doc = {"choices": [{"message": {"role": "assistant", "content": content}}]}
        return json.dumps(doc).encode()

    def _reply(self, status: int, body: bytes):
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class StubExpertServer:
    def __init__(self, behavior: str = "ok", content: str = COPT_SHOTS[0][1],
                 drop_first: int = 0, delay_s: float = 0.0,
                 oracle_after_drop: bool = False):
        self.behavior = behavior
        self.content = content
        self.drops_remaining = drop_first
        self.delay_s = delay_s
        self.oracle_after_drop = oracle_after_drop
        self.requests: list = []
        self.in_flight = 0
        self.max_in_flight = 0
        self.lock = threading.Lock()
        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self._httpd.stub = self  # type: ignore[attr-defined]
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self) -> "StubExpertServer":
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)
        return False
