"""Wire-level behaviour, checked with the companion toolkit's protocol
conformance suite and evaluation harness (test-time dependencies only;
the server itself never imports them)."""

from __future__ import annotations

import json
import signal
import socket
import subprocess
import sys
import threading
import time

import pytest
import requests

from lklm import conformance
from lklm import corpus as corpus_mod
from lklm import harness as h

from modelserver import models as m
from modelserver import server as srv

TINY = "untrained:tiny"
SMALLEST = "untrained:gpt2"


def free_port() -> int:
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


@pytest.fixture(scope="module")
def tiny_backend():
    return m.load_model(TINY)


@pytest.fixture(scope="module")
def tiny_server(tiny_backend):
    server = srv.ModelServer(port=0, cap=64)
    server.attach(tiny_backend)
    server.start()
    yield f"http://127.0.0.1:{server.port}"
    server.stop()


class TestProtocol:
    def test_passes_conformance_suite(self, tiny_server):
        results = conformance.assert_conformant(tiny_server)
        assert len(results) == 10

    def test_info_matches_backend(self, tiny_server, tiny_backend):
        data = requests.get(f"{tiny_server}/v1/info", timeout=10).json()
        assert data == tiny_backend.info()

    def test_unknown_paths_are_404(self, tiny_server):
        assert requests.get(f"{tiny_server}/v2/info", timeout=10).status_code == 404
        assert requests.post(f"{tiny_server}/v1/other", json={}, timeout=10).status_code == 404

    def test_not_ready_returns_503_then_recovers(self, tiny_backend):
        server = srv.ModelServer(port=0, cap=64)
        server.start()
        base = f"http://127.0.0.1:{server.port}"
        body = {
            "prompt": "spin", "strategy": "greedy", "beam_width": None,
            "max_new_tokens": 4, "temperature": None, "seed": None,
        }
        try:
            assert requests.get(f"{base}/v1/info", timeout=10).status_code == 503
            assert requests.post(f"{base}/v1/generate", json=body, timeout=10).status_code == 503
            server.attach(tiny_backend)
            assert requests.get(f"{base}/v1/info", timeout=10).status_code == 200
            assert requests.post(f"{base}/v1/generate", json=body, timeout=10).status_code == 200
        finally:
            server.stop()

    def test_non_positive_temperature_is_400(self, tiny_server):
        body = {
            "prompt": "spin", "strategy": "sample", "beam_width": None,
            "max_new_tokens": 4, "temperature": -1.0, "seed": 7,
        }
        resp = requests.post(f"{tiny_server}/v1/generate", json=body, timeout=10)
        assert resp.status_code == 400
        assert "temperature" in resp.json()["error"]

    def test_cap_clamps_oversized_requests(self, tiny_backend):
        body = {
            "prompt": "spin the cotton", "strategy": "greedy", "beam_width": None,
            "max_new_tokens": 32, "temperature": None, "seed": None,
        }
        loose = srv.ModelServer(port=0, cap=64)
        loose.attach(tiny_backend)
        loose.start()
        try:
            free_run = requests.post(
                f"http://127.0.0.1:{loose.port}/v1/generate", json=body, timeout=30
            ).json()
        finally:
            loose.stop()
        tight = srv.ModelServer(port=0, cap=4)
        tight.attach(tiny_backend)
        tight.start()
        try:
            capped = requests.post(
                f"http://127.0.0.1:{tight.port}/v1/generate", json=body, timeout=30
            ).json()
        finally:
            tight.stop()
        # the same request decodes further when only the cap differs
        assert free_run["tokens_generated"] > 4
        assert capped["tokens_generated"] <= 4

    def test_concurrent_requests_all_answered(self, tiny_server):
        statuses: list[int] = []
        lock = threading.Lock()

        def post(seed: int) -> None:
            body = {
                "prompt": "weave", "strategy": "sample", "beam_width": None,
                "max_new_tokens": 8, "temperature": 1.0, "seed": seed,
            }
            resp = requests.post(f"{tiny_server}/v1/generate", json=body, timeout=60)
            with lock:
                statuses.append(resp.status_code)

        threads = [threading.Thread(target=post, args=(i,)) for i in range(3)]
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout=60)
        assert statuses == [200, 200, 200]


class TestSmallestModel:
    def test_size_within_reference_band_and_conformant(self):
        backend = m.load_model(SMALLEST)
        reference = 0.55e9
        assert abs(backend.size_bytes - reference) <= 0.2 * reference
        server = srv.ModelServer(port=0, cap=64)
        server.attach(backend)
        server.start()
        base = f"http://127.0.0.1:{server.port}"
        try:
            info = requests.get(f"{base}/v1/info", timeout=30).json()
            assert info["size_bytes"] == backend.size_bytes
            conformance.assert_conformant(base, timeout_s=300.0)
        finally:
            server.stop()


class TestValidateGenerate:
    def test_null_optionals_get_defaults(self):
        params = srv.validate_generate({
            "prompt": "p", "strategy": "greedy", "beam_width": None,
            "max_new_tokens": None, "temperature": None, "seed": None,
        })
        assert params["max_new_tokens"] == 32
        assert params["temperature"] is None

    @pytest.mark.parametrize(
        "body",
        [
            [],
            {"strategy": "greedy"},
            {"prompt": "p", "strategy": "warp"},
            {"prompt": "p", "strategy": "beam", "beam_width": None},
            {"prompt": "p", "strategy": "beam", "beam_width": True},
            {"prompt": "p", "strategy": "greedy", "beam_width": 3},
            {"prompt": "p", "strategy": "greedy", "max_new_tokens": 0},
            {"prompt": "p", "strategy": "greedy", "max_new_tokens": True},
            {"prompt": "p", "strategy": "sample", "temperature": "hot"},
            {"prompt": "p", "strategy": "sample", "seed": 1.5},
            {"prompt": "p", "strategy": "sample", "seed": True},
        ],
    )
    def test_rejects_malformed_bodies(self, body):
        with pytest.raises(srv.RequestRejected):
            srv.validate_generate(body)


class TestServerConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"port": -1},
            {"port": 70000},
            {"port": True},
            {"max_new_tokens_cap": 0},
            {"device": "tpu"},
        ],
    )
    def test_invariants_enforced(self, kwargs):
        with pytest.raises(srv.ConfigError):
            srv.ServerConfig(model_name=TINY, **kwargs)

    def test_valid_config_accepted(self):
        cfg = srv.ServerConfig(model_name=TINY, port=0, max_new_tokens_cap=8, device="cpu")
        assert cfg.max_new_tokens_cap == 8

    @pytest.mark.skipif(
        __import__("torch").cuda.is_available(), reason="an accelerator is present"
    )
    def test_accelerator_without_hardware_rejected(self):
        with pytest.raises(srv.ConfigError):
            srv.torch_device("accelerator")


class TestTimingOrdering:
    def test_kg_inference_faster_than_remote_transformer(self, tiny_server, tmp_path):
        texts = {
            "textiles_01": (
                "textiles",
                "Spin the cotton into yarn. Weave the yarn into fabric. Cut the fabric into panels.",
            ),
            "textiles_02": (
                "textiles",
                "Sew the panels into a garment. Press the garment and inspect the seams.",
            ),
        }
        docs = [
            corpus_mod.Document(id=doc_id, domain=domain, sentences=corpus_mod.process_text(text))
            for doc_id, (domain, text) in sorted(texts.items())
        ]
        corpus_mod.save_corpus(corpus_mod.Corpus(documents=docs), tmp_path / "corpus.json")
        cfg_path = tmp_path / "eval.json"
        cfg_path.write_text(json.dumps({
            "corpus": "corpus.json",
            "models": ["kg", f"remote:{tiny_server}"],
            "strategies": [{"name": "greedy"}],
            "prompts": [{
                "domain": "textiles",
                "prompt": "Construct a cotton T-shirt from fiber to finished garment.",
            }],
            "max_new_tokens": 48,
            "output": {"csv": "report.csv", "json": "report.json"},
        }), encoding="utf-8")
        report = h.run_eval(h.load_eval_config(cfg_path))
        assert not report.failed
        by_model = {row.model: row for row in report.rows}
        assert set(by_model) == {"wordnet", TINY}
        assert by_model["wordnet"].inference_ms < by_model[TINY].inference_ms


class TestCliProcess:
    def test_serves_caps_and_shuts_down_on_signal(self):
        port = free_port()
        proc = subprocess.Popen(
            [sys.executable, "-m", "modelserver",
             "--model", TINY, "--port", str(port), "--cap", "8"],
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            text=True,
        )
        base = f"http://127.0.0.1:{port}"
        try:
            deadline = time.monotonic() + 120
            info = None
            while time.monotonic() < deadline:
                try:
                    resp = requests.get(f"{base}/v1/info", timeout=5)
                    if resp.status_code == 200:
                        info = resp.json()
                        break
                    assert resp.status_code == 503
                except requests.ConnectionError:
                    pass
                time.sleep(0.2)
            assert info is not None, "server never became ready"
            assert info["model_id"] == TINY
            body = {
                "prompt": "spin the cotton", "strategy": "greedy", "beam_width": None,
                "max_new_tokens": 32, "temperature": None, "seed": None,
            }
            data = requests.post(f"{base}/v1/generate", json=body, timeout=60).json()
            assert data["tokens_generated"] <= 8  # the --cap flag bites
            proc.send_signal(signal.SIGTERM)
            assert proc.wait(timeout=30) == 0
        finally:
            if proc.poll() is None:
                proc.kill()
                proc.wait(timeout=10)

    def test_usage_and_config_errors_exit_1(self):
        usage = subprocess.run(
            [sys.executable, "-m", "modelserver", "--device", "tpu"],
            capture_output=True,
            text=True,
        )
        assert usage.returncode == 1
        assert srv.cli(["--cap", "0"]) == 1
        assert srv.cli(["--model", "untrained:colossal", "--port", "0"]) == 1
