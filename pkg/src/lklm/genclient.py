"""HTTP client for remote generation backends.

The wire protocol is two JSON endpoints: ``GET /v1/info`` describing the
loaded model and ``POST /v1/generate`` running one decode.  The request
body always carries all six fields, with nulls for the ones a strategy
does not use.  Remote calls can take minutes on large models, so the
read timeout defaults to ten minutes and can be overridden through the
``LKLM_TIMEOUT_S`` environment variable.
"""

from __future__ import annotations

import os

import requests

from . import corpus as corpus_mod
from .errors import LklmError
from .ngram import STRATEGIES, GenerationResult


class ClientError(LklmError):
    pass


class InvalidRequestError(ClientError):
    """The request violates the protocol, caught locally or by a 400."""


class UnreachableError(ClientError):
    """The backend could not be reached at all."""


class BackendTimeoutError(ClientError):
    """The backend did not answer within the read timeout."""


class ProtocolError(ClientError):
    """The backend answered with a non-success status."""


class MalformedResponseError(ClientError):
    """The backend answered 200 with a body that does not fit the schema."""


DEFAULT_CONNECT_TIMEOUT_S = 10.0
DEFAULT_READ_TIMEOUT_S = 600.0
TIMEOUT_ENV_VAR = "LKLM_TIMEOUT_S"


def read_timeout_s() -> float:
    raw = os.environ.get(TIMEOUT_ENV_VAR)
    if raw is None:
        return DEFAULT_READ_TIMEOUT_S
    try:
        value = float(raw)
    except ValueError as exc:
        raise ClientError(f"{TIMEOUT_ENV_VAR} must be a number, got {raw!r}") from exc
    if value <= 0:
        raise ClientError(f"{TIMEOUT_ENV_VAR} must be positive, got {raw!r}")
    return value


def _expect(data: dict, key: str, kind: type) -> object:
    value = data.get(key)
    # bool is an int subclass; an int field must not accept True/False
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise MalformedResponseError(f"field {key!r} should be {kind.__name__}, got {value!r}")
    return value


class RemoteBackend:
    """Generation backend living behind the two-endpoint HTTP protocol."""

    def __init__(
        self,
        base_url: str,
        connect_timeout_s: float = DEFAULT_CONNECT_TIMEOUT_S,
        read_timeout_s_override: float | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.timeout = (
            connect_timeout_s,
            read_timeout_s_override if read_timeout_s_override is not None else read_timeout_s(),
        )
        self.session = requests.Session()

    def _request(self, method: str, path: str, body: dict | None = None) -> dict:
        url = self.base_url + path
        try:
            resp = self.session.request(method, url, json=body, timeout=self.timeout)
        except requests.Timeout as exc:
            raise BackendTimeoutError(f"{url} did not answer in {self.timeout[1]:g}s") from exc
        except requests.ConnectionError as exc:
            raise UnreachableError(f"cannot reach {url}: {exc}") from exc
        except requests.RequestException as exc:
            raise ClientError(f"request to {url} failed: {exc}") from exc
        if resp.status_code == 400:
            raise InvalidRequestError(f"{url} rejected the request: {resp.text[:200]}")
        if not 200 <= resp.status_code < 300:
            raise ProtocolError(f"{url} answered {resp.status_code}: {resp.text[:200]}")
        try:
            data = resp.json()
        except ValueError as exc:
            raise MalformedResponseError(f"{url} answered non-JSON: {resp.text[:200]}") from exc
        if not isinstance(data, dict):
            raise MalformedResponseError(f"{url} answered a JSON {type(data).__name__}, expected object")
        return data

    def info(self) -> dict:
        data = self._request("GET", "/v1/info")
        return {
            "model_id": _expect(data, "model_id", str),
            "size_bytes": _expect(data, "size_bytes", int),
            "load_ms": _expect(data, "load_ms", int),
        }

    def generate(
        self,
        prompt: str,
        strategy: str,
        beam_width: int | None = None,
        max_new_tokens: int = 32,
        temperature: float | None = None,
        seed: int | None = None,
    ) -> GenerationResult:
        if strategy not in STRATEGIES:
            raise InvalidRequestError(f"unknown strategy {strategy!r}")
        if strategy == "beam" and beam_width is None:
            raise InvalidRequestError("beam strategy requires beam_width")
        if strategy != "beam" and beam_width is not None:
            raise InvalidRequestError(f"beam_width is only valid with the beam strategy, not {strategy!r}")
        body = {
            "prompt": prompt,
            "strategy": strategy,
            "beam_width": beam_width,
            "max_new_tokens": max_new_tokens,
            "temperature": temperature,
            "seed": seed,
        }
        data = self._request("POST", "/v1/generate", body)
        text = _expect(data, "text", str)
        return GenerationResult(
            text=text,
            tokens=corpus_mod.tokenize(text),
            tokens_generated=_expect(data, "tokens_generated", int),
            logprob=None,
            model_id=_expect(data, "model_id", str),
            wall_ms=_expect(data, "inference_ms", int),
        )
