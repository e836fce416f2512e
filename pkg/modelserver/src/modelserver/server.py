"""HTTP front end: one loaded model behind the two-endpoint protocol.

``GET /v1/info`` answers {model_id, size_bytes, load_ms} and
``POST /v1/generate`` takes the six-key request body (prompt, strategy,
beam_width, max_new_tokens, temperature, seed) and answers {text,
tokens_generated, inference_ms, model_id}.  Both endpoints answer 503
until the model finishes loading, invalid bodies get a 400 with
{"error": reason}, and the process shuts down cleanly on SIGINT or
SIGTERM.

Exit codes: 0 success, 1 usage or configuration error (including a
model that cannot be obtained), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import torch

from .models import STRATEGIES, DecodeError, ModelLoadError, TransformerBackend, load_model

DEFAULT_MODEL = "untrained:gpt2"
DEFAULT_PORT = 8100
DEFAULT_CAP = 256
DEVICES = ("cpu", "accelerator")


class ConfigError(Exception):
    """The server configuration cannot be used."""


class RequestRejected(Exception):
    """The request body fails protocol validation."""


@dataclass
class ServerConfig:
    model_name: str
    port: int = DEFAULT_PORT
    max_new_tokens_cap: int = DEFAULT_CAP
    device: str = "cpu"

    def __post_init__(self):
        if isinstance(self.port, bool) or not isinstance(self.port, int) or not 0 <= self.port <= 65535:
            raise ConfigError(f"port must be an integer in [0, 65535], got {self.port!r}")
        if (
            isinstance(self.max_new_tokens_cap, bool)
            or not isinstance(self.max_new_tokens_cap, int)
            or self.max_new_tokens_cap < 1
        ):
            raise ConfigError(f"max_new_tokens_cap must be an integer >= 1, got {self.max_new_tokens_cap!r}")
        if self.device not in DEVICES:
            raise ConfigError(f"device must be one of {DEVICES}, got {self.device!r}")


def torch_device(device: str) -> str:
    """Map the config's device names onto what the tensor library expects."""
    if device == "cpu":
        return "cpu"
    if torch.cuda.is_available():
        return "cuda"
    raise ConfigError("device 'accelerator' requested but none is available")


def validate_generate(body: object) -> dict:
    """Check a /v1/generate body against the wire contract.

    Returns the six-field dict with defaults filled in.  Booleans are
    rejected where integers are required: bool is an int subclass, so a
    JSON true would otherwise slip through.
    """
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


def _make_handler(server: "ModelServer"):
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
            backend = server.backend
            if backend is None:
                self._reply(503, {"error": "model is still loading"})
                return
            self._reply(200, backend.info())

        def do_POST(self):
            if self.path != "/v1/generate":
                self._reply(404, {"error": "not found"})
                return
            backend = server.backend
            if backend is None:
                self._reply(503, {"error": "model is still loading"})
                return
            length = int(self.headers.get("Content-Length", 0))
            try:
                body = json.loads(self.rfile.read(length).decode("utf-8"))
                params = validate_generate(body)
            except (ValueError, RequestRejected) as exc:
                self._reply(400, {"error": str(exc)})
                return
            # the cap defends a small host against runaway requests
            max_new = min(params["max_new_tokens"], server.cap)
            try:
                result = backend.generate(
                    params["prompt"],
                    strategy=params["strategy"],
                    beam_width=params["beam_width"],
                    max_new_tokens=max_new,
                    temperature=params["temperature"] if params["strategy"] == "sample" else None,
                    seed=params["seed"],
                )
            except DecodeError as exc:
                self._reply(400, {"error": str(exc)})
                return
            except Exception as exc:  # noqa: BLE001 - surface as a 500, not a hang
                self._reply(500, {"error": str(exc)})
                return
            self._reply(200, {
                "text": result.text,
                "tokens_generated": result.tokens_generated,
                # measured inside the decode, so parsing and queueing stay out
                "inference_ms": result.wall_ms,
                "model_id": backend.model_id,
            })

    return Handler


class ModelServer:
    """Owns the listener, the loaded backend, and the serving thread.

    The listener can come up before the model exists; until ``attach``
    both endpoints answer 503, which lets callers poll readiness.
    """

    def __init__(self, host: str = "0.0.0.0", port: int = 0, cap: int = DEFAULT_CAP):
        self.cap = cap
        self.backend: TransformerBackend | None = None
        self._httpd = ThreadingHTTPServer((host, port), _make_handler(self))
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    def attach(self, backend: TransformerBackend) -> None:
        self.backend = backend

    def start(self) -> None:
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None


def serve(config: ServerConfig) -> int:
    """Run until SIGINT or SIGTERM.

    The listener starts before the model loads and answers 503 in the
    meantime, so a supervisor can bring the port up and poll /v1/info
    for readiness.
    """
    device = torch_device(config.device)
    server = ModelServer(port=config.port, cap=config.max_new_tokens_cap)
    server.start()
    print(f"listening on port {server.port}; loading {config.model_name}", flush=True)
    try:
        backend = load_model(config.model_name, device=device)
        server.attach(backend)
        info = backend.info()
        print(
            f"serving {info['model_id']} ({info['size_bytes']} bytes, loaded in {info['load_ms']} ms)",
            flush=True,
        )
        stop = threading.Event()
        previous = {
            sig: signal.signal(sig, lambda signum, frame: stop.set())
            for sig in (signal.SIGINT, signal.SIGTERM)
        }
        try:
            stop.wait()
        finally:
            for sig, handler in previous.items():
                signal.signal(sig, handler)
        print("shutting down", flush=True)
        return 0
    finally:
        server.stop()


class _Parser(argparse.ArgumentParser):
    # usage problems are exit code 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="modelserver",
        description="Serve one causal language model over the two-endpoint generation protocol.",
    )
    parser.add_argument(
        "--model",
        default=DEFAULT_MODEL,
        help="model name; untrained:gpt2 and untrained:tiny build seeded random weights offline "
        "(default: %(default)s)",
    )
    parser.add_argument("--port", type=int, default=DEFAULT_PORT, help="listen port (default: %(default)s)")
    parser.add_argument("--device", choices=DEVICES, default="cpu", help="where to run the model")
    parser.add_argument(
        "--cap",
        type=int,
        default=DEFAULT_CAP,
        help="hard ceiling on max_new_tokens per request (default: %(default)s)",
    )
    return parser


def cli(argv: list[str]) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = ServerConfig(
            model_name=args.model,
            port=args.port,
            max_new_tokens_cap=args.cap,
            device=args.device,
        )
        return serve(config)
    except (ConfigError, ModelLoadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failure, distinct exit code
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv: list[str] | None = None) -> int:
    return cli(sys.argv[1:] if argv is None else argv)
