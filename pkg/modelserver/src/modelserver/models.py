"""Causal transformer backends behind a three-strategy decoding contract.

Model names use an ``untrained:`` scheme to stay usable on machines with
no route to a weight hub: ``untrained:gpt2`` instantiates the GPT-2 small
architecture from its config with seeded random weights, and
``untrained:tiny`` a two-layer miniature for fast tests.  An untrained
net emits meaningless text, but its parameter count, memory footprint
and decoding behaviour are the real thing, which is what the protocol
reports.  Any other name goes through the ecosystem's standard loader
and works wherever a weight cache or reachable hub provides it.
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass
from typing import Sequence

import torch

STRATEGIES = ("greedy", "beam", "sample")

UNTRAINED_PREFIX = "untrained:"
WEIGHT_SEED = 0  # untrained weights must agree across restarts
DEFAULT_TEMPERATURE = 1.0


class ModelLoadError(Exception):
    """The named model could not be constructed or fetched."""


class DecodeError(Exception):
    """Decode-time parameters are invalid for the requested strategy."""


class WordTokenizer:
    """Deterministic word-level tokenizer over a fixed id space.

    Ids come from a stable digest of the word, so encoding needs no
    vocabulary file and every process agrees on it.  Decoding yields
    ``w<id>`` placeholders; untrained weights produce no meaningful
    surface form anyway, and placeholders keep the text deterministic.
    """

    def __init__(self, vocab_size: int, bos_id: int, eos_id: int):
        self.vocab_size = vocab_size
        self.bos_id = bos_id
        self.eos_id = eos_id

    def encode(self, text: str) -> list[int]:
        words = text.split()
        if not words:
            # generation needs at least one position to condition on
            return [self.bos_id]
        out = []
        for word in words:
            digest = hashlib.blake2b(word.encode("utf-8"), digest_size=8).digest()
            out.append(int.from_bytes(digest, "big") % self.vocab_size)
        return out

    def decode(self, ids: Sequence[int]) -> str:
        special = {self.bos_id, self.eos_id}
        return " ".join(f"w{i}" for i in ids if i not in special)


class HubTokenizer:
    """Adapter putting a hub tokenizer behind the same encode/decode pair."""

    def __init__(self, inner):
        self.inner = inner
        eos = inner.eos_token_id
        self.eos_id = eos if eos is not None else 0
        bos = inner.bos_token_id
        self.bos_id = bos if bos is not None else self.eos_id

    def encode(self, text: str) -> list[int]:
        ids = self.inner.encode(text)
        return list(ids) if ids else [self.bos_id]

    def decode(self, ids: Sequence[int]) -> str:
        return self.inner.decode(list(ids), skip_special_tokens=True).strip()


@dataclass
class Generation:
    """One decode: continuation text, how many ids it took, wall time."""

    text: str
    tokens_generated: int
    wall_ms: int


class TransformerBackend:
    """One loaded causal LM behind the generation contract.

    Generation is serialised with a lock: one request decodes at a time,
    so the reported wall time measures a single decode and a small host
    is never asked to hold two forward passes at once.
    """

    def __init__(self, model_id: str, model, tokenizer, load_ms: int):
        self.model_id = model_id
        self.model = model
        self.tokenizer = tokenizer
        self.load_ms = load_ms
        self.size_bytes = sum(p.numel() * p.element_size() for p in model.parameters())
        self._lock = threading.Lock()

    def info(self) -> dict:
        return {
            "model_id": self.model_id,
            "size_bytes": self.size_bytes,
            "load_ms": self.load_ms,
        }

    def generate(
        self,
        prompt: str,
        strategy: str,
        beam_width: int | None = None,
        max_new_tokens: int = 32,
        temperature: float | None = None,
        seed: int | None = None,
    ) -> Generation:
        if strategy not in STRATEGIES:
            raise DecodeError(f"unknown strategy {strategy!r}")
        if strategy == "beam" and (beam_width is None or beam_width < 1):
            raise DecodeError("beam strategy requires beam_width >= 1")
        if max_new_tokens < 1:
            raise DecodeError(f"max_new_tokens must be >= 1, got {max_new_tokens}")
        if temperature is not None and temperature <= 0:
            raise DecodeError(f"temperature must be positive, got {temperature}")

        kwargs: dict = {"max_new_tokens": max_new_tokens, "do_sample": False, "num_beams": 1}
        if strategy == "beam":
            kwargs["num_beams"] = beam_width
        elif strategy == "sample":
            kwargs["do_sample"] = True
            kwargs["temperature"] = float(temperature if temperature is not None else DEFAULT_TEMPERATURE)

        ids = self.tokenizer.encode(prompt)
        limit = getattr(self.model.config, "n_positions", None) or getattr(
            self.model.config, "max_position_embeddings", None
        )
        if limit is not None:
            # prompt plus continuation must fit the context window
            ids = ids[-max(1, limit - max_new_tokens):]
        input_ids = torch.tensor([ids], dtype=torch.long, device=self.model.device)

        with self._lock:
            t0 = time.perf_counter()
            if strategy == "sample" and seed is not None:
                torch.manual_seed(seed)
            with torch.no_grad():
                out = self.model.generate(
                    input_ids,
                    attention_mask=torch.ones_like(input_ids),
                    pad_token_id=self.tokenizer.eos_id,
                    **kwargs,
                )
            new_ids = out[0][input_ids.shape[1]:].tolist()
            text = self.tokenizer.decode(new_ids)
            wall_ms = int((time.perf_counter() - t0) * 1000)
        return Generation(text=text, tokens_generated=len(new_ids), wall_ms=wall_ms)


def _untrained_config(arch: str):
    from transformers import GPT2Config

    if arch == "gpt2":
        return GPT2Config()
    if arch == "tiny":
        return GPT2Config(
            vocab_size=512,
            n_positions=128,
            n_embd=32,
            n_layer=2,
            n_head=2,
            bos_token_id=0,
            eos_token_id=0,
        )
    raise ModelLoadError(
        f"unknown untrained architecture {arch!r}; expected one of: gpt2, tiny"
    )


def load_model(name: str, device: str = "cpu") -> TransformerBackend:
    """Build the named backend; construction time lands in info()'s load_ms."""
    t0 = time.perf_counter()
    if name.startswith(UNTRAINED_PREFIX):
        from transformers import GPT2LMHeadModel

        config = _untrained_config(name[len(UNTRAINED_PREFIX):])
        torch.manual_seed(WEIGHT_SEED)
        model = GPT2LMHeadModel(config)
        tokenizer = WordTokenizer(config.vocab_size, config.bos_token_id, config.eos_token_id)
    else:
        from transformers import AutoModelForCausalLM, AutoTokenizer

        try:
            model = AutoModelForCausalLM.from_pretrained(name)
            tokenizer = HubTokenizer(AutoTokenizer.from_pretrained(name))
        except Exception as exc:
            raise ModelLoadError(f"cannot obtain model {name!r}: {exc}") from exc
    model.to(device)
    model.eval()
    load_ms = int((time.perf_counter() - t0) * 1000)
    return TransformerBackend(name, model, tokenizer, load_ms)
