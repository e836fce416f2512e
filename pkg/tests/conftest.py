from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources
from pathlib import Path

import pytest

from lklm import corpus as c


def make_corpus(spec: dict[str, tuple[str, str]]) -> c.Corpus:
    """Build a tagged in-memory corpus from {doc_id: (domain, text)}."""
    docs = []
    for doc_id in sorted(spec):
        domain, text = spec[doc_id]
        docs.append(c.Document(id=doc_id, domain=domain, sentences=c.process_text(text)))
    return c.Corpus(documents=docs)


def data_path(*parts: str) -> Path:
    """Path of a packaged data file (the packaged data is plain files)."""
    return Path(str(resources.files("lklm.data").joinpath("/".join(parts))))


def toy_corpus() -> c.Corpus:
    return c.build_corpus(
        data_path("toy"),
        [
            ("textiles_*", "textiles"),
            ("electronics_*", "electronics"),
            ("remanufacturing_*", "remanufacturing"),
        ],
    )


class Stub:
    """Tiny configurable HTTP server for exercising the client."""

    def __init__(self):
        self.info_status = 200
        self.info_body: object = {"model_id": "stub", "size_bytes": 123, "load_ms": 7}
        self.generate_status = 200
        self.generate_body: object = {
            "text": "spin the yarn",
            "tokens_generated": 4,
            "inference_ms": 12,
            "model_id": "stub",
        }
        self.delay_s = 0.0
        self.seen: list[dict] = []

        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, status, body):
                payload = body if isinstance(body, str) else json.dumps(body)
                data = payload.encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_GET(self):
                if stub.delay_s:
                    time.sleep(stub.delay_s)
                if self.path == "/v1/info":
                    self._send(stub.info_status, stub.info_body)
                else:
                    self._send(404, {"error": "not found"})

            def do_POST(self):
                if stub.delay_s:
                    time.sleep(stub.delay_s)
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length)
                if self.path == "/v1/generate":
                    stub.seen.append(json.loads(raw))
                    self._send(stub.generate_status, stub.generate_body)
                else:
                    self._send(404, {"error": "not found"})

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def stub():
    s = Stub()
    yield s
    s.close()
