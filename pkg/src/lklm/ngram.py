"""Add-k smoothed n-gram language model with greedy, beam and temperature
sampling decoders.

Probabilities back off to the longest context suffix seen in training, so
the conditional distribution always sums to one over the vocabulary.

Beam search here is *anytime widening*: ``beam`` with width w runs plain
fixed-width beams at widths 1..w and keeps the best finished candidate
under the length-normalised score.  Plain fixed-width beam search is not
monotone in its width (a wide front can flood out the prefix of the best
sequence); taking the running best over nested widths restores the two
properties callers rely on: width 1 equals greedy, and widening never
makes the result worse.
"""

from __future__ import annotations

import json
import math
import random
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import corpus as corpus_mod
from .corpus import Corpus
from .errors import LklmError

BOS = "<bos>"
EOS = "<eos>"
UNK = "<unk>"


class NgramError(LklmError):
    pass


class DecodeError(NgramError):
    """Bad decoding arguments: unknown strategy, missing or stray width."""


class ModelFormatError(NgramError):
    """A serialised model file does not match the expected shape."""


@dataclass
class GenerationResult:
    text: str
    tokens: list[str]
    tokens_generated: int
    logprob: float | None  # None for backends that do not report it
    model_id: str | None = None
    wall_ms: int | None = None

    @property
    def norm_score(self) -> float:
        if self.logprob is None:
            raise ValueError("this result carries no log probability")
        return self.logprob / max(1, self.tokens_generated)


@dataclass
class NGramModel:
    n: int
    k: float
    vocab: set[str] = field(default_factory=set)
    counts: dict[tuple[str, ...], Counter] = field(default_factory=dict)

    def _context_total(self, ctx: tuple[str, ...]) -> int:
        return sum(self.counts[ctx].values())

    def _fold_unknown(self, word: str) -> str:
        return word if word in self.vocab else UNK

    def prob(self, context: Sequence[str], word: str) -> float:
        """P(word | context) with add-k smoothing on the longest trained
        context suffix.  Unknown words (in either position) fold to the
        unknown marker; the empty context is always available."""
        word = self._fold_unknown(word)
        ctx = tuple(self._fold_unknown(w) for w in context)[-(self.n - 1) :] if self.n > 1 else ()
        while ctx not in self.counts and ctx:
            ctx = ctx[1:]
        counter = self.counts.get(ctx, Counter())
        total = sum(counter.values())
        v = len(self.vocab)
        denom = total + self.k * v
        if denom == 0:
            return 1.0 / v if v else 0.0
        return (counter[word] + self.k) / denom

    def logprob(self, context: Sequence[str], word: str) -> float:
        p = self.prob(context, word)
        return math.log(p) if p > 0 else -math.inf


def train(sequences: Iterable[Sequence[str]], n: int, k: float = 1.0) -> NGramModel:
    """Count every order 1..n over the padded sequences.  Padding is
    n-1 leading markers and one trailing end marker; the markers join the
    vocabulary alongside the unknown marker."""
    if n < 1:
        raise NgramError(f"order must be >= 1, got {n}")
    if k < 0:
        raise NgramError(f"smoothing must be >= 0, got {k}")
    model = NGramModel(n=n, k=k)
    model.vocab.update((BOS, EOS, UNK))
    for seq in sequences:
        seq = list(seq)
        model.vocab.update(seq)
        padded = [BOS] * (n - 1) + seq + [EOS]
        for i in range(n - 1, len(padded)):
            for m in range(n):
                ctx = tuple(padded[i - m : i])
                model.counts.setdefault(ctx, Counter())[padded[i]] += 1
    model.counts.setdefault((), Counter())
    return model


def train_from_corpus(corpus: Corpus, n: int, k: float = 1.0) -> NGramModel:
    """Train on one lemma stream per document (sentences concatenated),
    so the model learns cross-sentence transitions and can generate more
    than a single sentence."""
    seqs = [
        [t.lemma for sent in doc.sentences for t in sent.tokens]
        for doc in corpus.documents
    ]
    return train(seqs, n=n, k=k)


def _candidates(model: NGramModel) -> list[str]:
    # the begin marker is never generated; everything else may be
    return sorted(w for w in model.vocab if w != BOS)


def _prompt_context(model: NGramModel, prompt_tokens: Sequence[str]) -> list[str]:
    return [BOS] * (model.n - 1) + list(prompt_tokens)


def greedy_decode(
    model: NGramModel,
    prompt_tokens: Sequence[str],
    max_new_tokens: int,
) -> GenerationResult:
    """Pick the most probable next token each step; ties go to the
    lexicographically smallest candidate."""
    context = _prompt_context(model, prompt_tokens)
    out: list[str] = []
    logprob = 0.0
    steps = 0
    cands = _candidates(model)
    for _ in range(max_new_tokens):
        best_w, best_p = None, -1.0
        for w in cands:
            p = model.prob(context, w)
            if p > best_p:
                best_w, best_p = w, p
        assert best_w is not None
        logprob += math.log(best_p) if best_p > 0 else -math.inf
        steps += 1
        if best_w == EOS:
            break
        out.append(best_w)
        context.append(best_w)
    return GenerationResult(
        text=corpus_mod.detokenize(out),
        tokens=out,
        tokens_generated=steps,
        logprob=logprob,
    )


@dataclass
class _Beam:
    tokens: list[str]
    logprob: float
    done: bool

    def steps(self) -> int:
        return len(self.tokens) + (1 if self.done else 0)

    def norm(self) -> float:
        return self.logprob / max(1, self.steps())


def _beam_better(a: _Beam, b: _Beam | None) -> bool:
    if b is None:
        return True
    if a.norm() != b.norm():
        return a.norm() > b.norm()
    return a.tokens < b.tokens


def _plain_beam(
    model: NGramModel,
    prompt_tokens: Sequence[str],
    width: int,
    max_new_tokens: int,
) -> _Beam:
    """Textbook fixed-width beam search, ranked by raw log probability
    during expansion and by length-normalised score at the end."""
    base = _prompt_context(model, prompt_tokens)
    cands = _candidates(model)
    beams = [_Beam(tokens=[], logprob=0.0, done=False)]
    for _ in range(max_new_tokens):
        pool: list[_Beam] = []
        for beam in beams:
            if beam.done:
                pool.append(beam)
                continue
            context = base + beam.tokens
            for w in cands:
                lp = beam.logprob + model.logprob(context, w)
                if w == EOS:
                    pool.append(_Beam(beam.tokens, lp, True))
                else:
                    pool.append(_Beam(beam.tokens + [w], lp, False))
        pool.sort(key=lambda b: (-b.logprob, b.tokens))
        beams = pool[:width]
        if all(b.done for b in beams):
            break
    best = beams[0]
    for cand in beams[1:]:
        if _beam_better(cand, best):
            best = cand
    return best


def beam_decode(
    model: NGramModel,
    prompt_tokens: Sequence[str],
    beam_width: int,
    max_new_tokens: int,
) -> GenerationResult:
    """Best finished candidate over plain beams at widths 1..beam_width,
    scored by log probability per generated token.  Ties prefer the
    lexicographically smaller token sequence."""
    if beam_width < 1:
        raise DecodeError(f"beam width must be >= 1, got {beam_width}")
    best: _Beam | None = None
    for w in range(1, beam_width + 1):
        cand = _plain_beam(model, prompt_tokens, w, max_new_tokens)
        if _beam_better(cand, best):
            best = cand
    assert best is not None
    return GenerationResult(
        text=corpus_mod.detokenize(best.tokens),
        tokens=list(best.tokens),
        tokens_generated=best.steps(),
        logprob=best.logprob,
    )


def sample_decode(
    model: NGramModel,
    prompt_tokens: Sequence[str],
    max_new_tokens: int,
    temperature: float | None = None,
    seed: int | None = None,
) -> GenerationResult:
    """Temperature sampling over the sorted candidate list via inverse
    CDF, so a fixed seed gives a fixed sequence."""
    tau = 1.0 if temperature is None else temperature
    if tau <= 0:
        raise DecodeError(f"temperature must be > 0, got {temperature}")
    rng = random.Random(seed)
    context = _prompt_context(model, prompt_tokens)
    cands = _candidates(model)
    out: list[str] = []
    logprob = 0.0
    steps = 0
    for _ in range(max_new_tokens):
        probs = [model.prob(context, w) for w in cands]
        # temperature scaling in log space, rescaled by the maximum so
        # small temperatures sharpen instead of underflowing to zero
        logs = [math.log(p) if p > 0 else -math.inf for p in probs]
        peak = max(logs)
        weights = [math.exp((lp - peak) / tau) if lp > -math.inf else 0.0 for lp in logs]
        total = sum(weights)
        x = rng.random() * total
        acc = 0.0
        chosen = cands[-1]
        chosen_p = probs[-1]
        for w, p, wt in zip(cands, probs, weights):
            acc += wt
            if x < acc:
                chosen, chosen_p = w, p
                break
        logprob += math.log(chosen_p) if chosen_p > 0 else -math.inf
        steps += 1
        if chosen == EOS:
            break
        out.append(chosen)
        context.append(chosen)
    return GenerationResult(
        text=corpus_mod.detokenize(out),
        tokens=out,
        tokens_generated=steps,
        logprob=logprob,
    )


STRATEGIES = ("greedy", "beam", "sample")


def decode(
    model: NGramModel,
    prompt_tokens: Sequence[str],
    strategy: str,
    beam_width: int | None = None,
    max_new_tokens: int = 32,
    temperature: float | None = None,
    seed: int | None = None,
) -> GenerationResult:
    """Dispatch to one decoder, enforcing that a beam width is given
    exactly when the strategy is beam."""
    if strategy not in STRATEGIES:
        raise DecodeError(f"unknown strategy {strategy!r}")
    if strategy == "beam":
        if beam_width is None:
            raise DecodeError("beam strategy requires beam_width")
        return beam_decode(model, prompt_tokens, beam_width, max_new_tokens)
    if beam_width is not None:
        raise DecodeError(f"beam_width is only valid with the beam strategy, not {strategy!r}")
    if strategy == "greedy":
        return greedy_decode(model, prompt_tokens, max_new_tokens)
    return sample_decode(model, prompt_tokens, max_new_tokens, temperature, seed)


def model_to_dict(model: NGramModel) -> dict:
    return {
        "n": model.n,
        "k": model.k,
        "vocab": sorted(model.vocab),
        "counts": {
            " ".join(ctx): {w: c for w, c in sorted(counter.items())}
            for ctx, counter in sorted(model.counts.items())
        },
    }


def model_from_dict(data: dict) -> NGramModel:
    try:
        model = NGramModel(n=int(data["n"]), k=float(data["k"]))
        model.vocab = set(data["vocab"])
        for key, words in data["counts"].items():
            ctx = tuple(key.split(" ")) if key else ()
            model.counts[ctx] = Counter({w: int(c) for w, c in words.items()})
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ModelFormatError(f"bad model shape: {exc}") from exc
    return model


def save_model(model: NGramModel, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(model_to_dict(model), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def load_model(path: str | Path) -> NGramModel:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not valid JSON: {exc}") from exc
    return model_from_dict(data)


class NGramBackend:
    """Local generation backend over a trained model.  Prompts are folded
    to lemma space to match training; the reported size is the canonical
    serialised form."""

    def __init__(self, model: NGramModel, model_id: str | None = None, load_ms: int = 0):
        self.model = model
        self.model_id = model_id or f"ngram:{model.n}"
        self.load_ms = load_ms

    @classmethod
    def from_corpus(cls, corpus: Corpus, n: int, k: float = 1.0) -> "NGramBackend":
        t0 = time.perf_counter()
        model = train_from_corpus(corpus, n=n, k=k)
        load_ms = int((time.perf_counter() - t0) * 1000)
        return cls(model, load_ms=load_ms)

    def info(self) -> dict:
        size = len(json.dumps(model_to_dict(self.model)).encode("utf-8"))
        return {"model_id": self.model_id, "size_bytes": size, "load_ms": self.load_ms}

    def generate(
        self,
        prompt: str,
        strategy: str,
        beam_width: int | None = None,
        max_new_tokens: int = 32,
        temperature: float | None = None,
        seed: int | None = None,
    ) -> GenerationResult:
        prompt_tokens = [corpus_mod.classify(t).lemma for t in corpus_mod.tokenize(prompt)]
        # a trailing terminator would put the model right where documents
        # end, so the very first step would close the text; continue the
        # discourse instead
        while prompt_tokens and prompt_tokens[-1] in {".", "!", "?"}:
            prompt_tokens.pop()
        t0 = time.perf_counter()
        result = decode(
            self.model,
            prompt_tokens,
            strategy=strategy,
            beam_width=beam_width,
            max_new_tokens=max_new_tokens,
            temperature=temperature,
            seed=seed,
        )
        result.wall_ms = int((time.perf_counter() - t0) * 1000)
        result.model_id = self.model_id
        return result
