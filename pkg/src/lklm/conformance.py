"""Wire protocol conformance: a reference HTTP server around any local
backend, and client-side checks a server implementation can run against
itself.

The protocol is the one the remote client speaks: GET /v1/info returns
{model_id, size_bytes, load_ms}; POST /v1/generate takes the six-key
request body and returns {text, tokens_generated, inference_ms,
model_id}.  Invalid requests get a 400 with {"error": reason}.
"""

from __future__ import annotations

import contextlib
import json
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import requests

from .errors import LklmError
from .ngram import STRATEGIES, DecodeError


class RequestRejected(LklmError):
    """Server side: the request body fails protocol validation."""


def _validate_generate(body: object) -> dict:
    if not isinstance(body, dict):
        raise RequestRejected("body must be a JSON object")
    prompt = body.get("prompt")
    if not isinstance(prompt, str):
        raise RequestRejected("prompt must be a string")
    strategy = body.get("strategy")
    if strategy not in STRATEGIES:
        raise RequestRejected(f"unknown strategy {strategy!r}")
    beam_width = body.get("beam_width")
    if strategy == "beam":
        if isinstance(beam_width, bool) or not isinstance(beam_width, int) or beam_width < 1:
            raise RequestRejected("beam strategy requires an integer beam_width >= 1")
    elif beam_width is not None:
        raise RequestRejected("beam_width is only valid with the beam strategy")
    max_new = body.get("max_new_tokens", 32)
    if max_new is None:
        max_new = 32
    if isinstance(max_new, bool) or not isinstance(max_new, int) or max_new < 1:
        raise RequestRejected("max_new_tokens must be an integer >= 1")
    temperature = body.get("temperature")
    if temperature is not None and (
        isinstance(temperature, bool) or not isinstance(temperature, (int, float))
    ):
        raise RequestRejected("temperature must be a number")
    seed = body.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise RequestRejected("seed must be an integer")
    return {
        "prompt": prompt,
        "strategy": strategy,
        "beam_width": beam_width,
        "max_new_tokens": max_new,
        "temperature": temperature,
        "seed": seed,
    }


def _make_handler(backend):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _reply(self, status: int, payload: dict) -> None:
            raw = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(raw)))
            self.end_headers()
            self.wfile.write(raw)

        def do_GET(self):
            if self.path != "/v1/info":
                self._reply(404, {"error": "not found"})
                return
            self._reply(200, backend.info())

        def do_POST(self):
            if self.path != "/v1/generate":
                self._reply(404, {"error": "not found"})
                return
            length = int(self.headers.get("Content-Length", 0))
            try:
                body = json.loads(self.rfile.read(length).decode("utf-8"))
                params = _validate_generate(body)
            except (ValueError, RequestRejected) as exc:
                self._reply(400, {"error": str(exc)})
                return
            try:
                t0 = time.perf_counter()
                result = backend.generate(
                    params["prompt"],
                    strategy=params["strategy"],
                    beam_width=params["beam_width"],
                    max_new_tokens=params["max_new_tokens"],
                    temperature=params["temperature"] if params["strategy"] == "sample" else None,
                    seed=params["seed"],
                )
                inference_ms = int((time.perf_counter() - t0) * 1000)
            except DecodeError as exc:
                self._reply(400, {"error": str(exc)})
                return
            except Exception as exc:  # noqa: BLE001 - surface as a 500, not a hang
                self._reply(500, {"error": str(exc)})
                return
            self._reply(200, {
                "text": result.text,
                "tokens_generated": result.tokens_generated,
                "inference_ms": inference_ms,
                "model_id": getattr(result, "model_id", None) or backend.info()["model_id"],
            })

    return Handler


@contextlib.contextmanager
def serve_backend(backend, host: str = "127.0.0.1", port: int = 0):
    """Serve a local backend over the wire protocol; yields the base URL.
    Intended for tests and as a behavioural reference for real servers."""
    server = ThreadingHTTPServer((host, port), _make_handler(backend))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://{server.server_address[0]}:{server.server_address[1]}"
    finally:
        server.shutdown()
        server.server_close()
        thread.join(timeout=5)


# ---------------------------------------------------------------------------
# client-side checks


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _body(
    prompt: str = "assemble the machine",
    strategy: str = "greedy",
    beam_width: int | None = None,
    max_new_tokens: int = 16,
    temperature: float | None = None,
    seed: int | None = None,
) -> dict:
    return {
        "prompt": prompt,
        "strategy": strategy,
        "beam_width": beam_width,
        "max_new_tokens": max_new_tokens,
        "temperature": temperature,
        "seed": seed,
    }


def _is_int(value: object) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def run_checks(base_url: str, timeout_s: float = 30.0) -> list[CheckResult]:
    """Exercise a live server; every check yields a pass/fail record and
    a failure never raises."""
    base = base_url.rstrip("/")
    session = requests.Session()

    def _get_info():
        return session.get(f"{base}/v1/info", timeout=timeout_s)

    def _generate(body: dict):
        return session.post(f"{base}/v1/generate", json=body, timeout=timeout_s)

    results: list[CheckResult] = []

    def check(name: str):
        def wrap(fn):
            try:
                detail = fn() or ""
                results.append(CheckResult(name, True, detail))
            except Exception as exc:  # noqa: BLE001 - report, do not abort the suite
                results.append(CheckResult(name, False, str(exc)))
        return wrap

    @check("info-schema")
    def _():
        resp = _get_info()
        assert resp.status_code == 200, f"status {resp.status_code}"
        data = resp.json()
        assert isinstance(data.get("model_id"), str), "model_id must be a string"
        assert _is_int(data.get("size_bytes")) and data["size_bytes"] > 0, "size_bytes must be a positive integer"
        assert _is_int(data.get("load_ms")) and data["load_ms"] >= 0, "load_ms must be a non-negative integer"

    @check("generate-schema")
    def _():
        resp = _generate(_body(max_new_tokens=8))
        assert resp.status_code == 200, f"status {resp.status_code}: {resp.text[:200]}"
        data = resp.json()
        assert isinstance(data.get("text"), str), "text must be a string"
        assert _is_int(data.get("tokens_generated")) and data["tokens_generated"] >= 0, \
            "tokens_generated must be a non-negative integer"
        assert _is_int(data.get("inference_ms")) and data["inference_ms"] >= 0, \
            "inference_ms must be a non-negative integer"
        assert isinstance(data.get("model_id"), str), "model_id must be a string"
        info = _get_info().json()
        assert data["model_id"] == info["model_id"], \
            f"model_id {data['model_id']!r} differs from /v1/info {info['model_id']!r}"

    @check("greedy-deterministic")
    def _():
        a = _generate(_body(max_new_tokens=12)).json()
        b = _generate(_body(max_new_tokens=12)).json()
        assert a["text"] == b["text"], f"{a['text']!r} != {b['text']!r}"
        assert a["tokens_generated"] == b["tokens_generated"]

    @check("sample-seeded-deterministic")
    def _():
        body = _body(strategy="sample", temperature=0.9, seed=1234, max_new_tokens=12)
        a = _generate(body).json()
        b = _generate(body).json()
        assert a["text"] == b["text"], f"{a['text']!r} != {b['text']!r}"

    @check("beam-accepts-width")
    def _():
        resp = _generate(_body(strategy="beam", beam_width=2, max_new_tokens=8))
        assert resp.status_code == 200, f"status {resp.status_code}: {resp.text[:200]}"
        assert isinstance(resp.json().get("text"), str)

    @check("token-cap-respected")
    def _():
        data = _generate(_body(max_new_tokens=3)).json()
        assert data["tokens_generated"] <= 3, f"generated {data['tokens_generated']} > cap 3"

    @check("rejects-unknown-strategy")
    def _():
        resp = _generate(_body(strategy="warp"))
        assert resp.status_code == 400, f"status {resp.status_code}"

    @check("rejects-beam-without-width")
    def _():
        resp = _generate(_body(strategy="beam", beam_width=None))
        assert resp.status_code == 400, f"status {resp.status_code}"

    @check("rejects-stray-beam-width")
    def _():
        resp = _generate(_body(strategy="greedy", beam_width=3))
        assert resp.status_code == 400, f"status {resp.status_code}"

    @check("rejects-malformed-json")
    def _():
        resp = session.post(
            f"{base}/v1/generate",
            data="{not json",
            headers={"Content-Type": "application/json"},
            timeout=timeout_s,
        )
        assert resp.status_code == 400, f"status {resp.status_code}"

    return results


def assert_conformant(base_url: str, timeout_s: float = 30.0) -> list[CheckResult]:
    """Run all checks and raise AssertionError listing any failures."""
    results = run_checks(base_url, timeout_s=timeout_s)
    failures = [r for r in results if not r.passed]
    if failures:
        lines = "\n".join(f"  {r.name}: {r.detail}" for r in failures)
        raise AssertionError(f"protocol conformance failures:\n{lines}")
    return results
