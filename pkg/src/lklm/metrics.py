"""Output quality measures: embedding relevance, transition-marker
density and a composite coherence score.

Embeddings are read from the common text format (word followed by its
vector components on one line).  Texts pool to the mean vector of their
lowercased surface tokens; words without a vector are skipped.
"""

from __future__ import annotations

import csv
import math
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, TypeVar

from . import corpus as corpus_mod
from .errors import LklmError

Vector = list[float]
T = TypeVar("T")


class MetricsError(LklmError):
    pass


class EmbeddingFormatError(MetricsError):
    """An embedding file line does not parse or dimensions disagree."""


class ScoreFormatError(MetricsError):
    """A score file row is malformed, duplicated or out of range."""


def load_embeddings(path: str | Path) -> dict[str, Vector]:
    table: dict[str, Vector] = {}
    dim: int | None = None
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) < 2:
            raise EmbeddingFormatError(f"line {lineno}: no vector components")
        word = parts[0]
        try:
            vec = [float(x) for x in parts[1:]]
        except ValueError as exc:
            raise EmbeddingFormatError(f"line {lineno}: {exc}") from exc
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise EmbeddingFormatError(
                f"line {lineno}: dimension {len(vec)} != {dim}"
            )
        table[word] = vec
    return table


def cosine(u: Vector, v: Vector) -> float:
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    if nu == 0 or nv == 0:
        return 0.0
    return dot / (nu * nv)


def pool(text: str, embeddings: dict[str, Vector]) -> Vector | None:
    """Mean vector of the text's lowercased tokens; None when nothing in
    the text has a vector."""
    vecs = [
        embeddings[tok.lower()]
        for tok in corpus_mod.tokenize(text)
        if tok.lower() in embeddings
    ]
    if not vecs:
        return None
    dim = len(vecs[0])
    return [sum(v[i] for v in vecs) / len(vecs) for i in range(dim)]


def relevance(text: str, reference: str, embeddings: dict[str, Vector]) -> float:
    """Cosine similarity of the pooled text and reference vectors; zero
    when either side has no known words."""
    a = pool(text, embeddings)
    b = pool(reference, embeddings)
    if a is None or b is None:
        return 0.0
    return cosine(a, b)


TRANSITION_MARKERS = ("furthermore", "however", "therefore", "moreover", "in addition")
_MARKER_RE = re.compile(
    r"\b(?:" + "|".join(m.replace(" ", r"\s+") for m in TRANSITION_MARKERS) + r")\b",
    re.IGNORECASE,
)
_WORD_TOKEN_RE = re.compile(r"[A-Za-z0-9]")


def transition_density(text: str) -> float:
    """Transition markers per 100 word tokens (punctuation excluded)."""
    words = [t for t in corpus_mod.tokenize(text) if _WORD_TOKEN_RE.search(t)]
    if not words:
        return 0.0
    return 100.0 * len(_MARKER_RE.findall(text)) / len(words)


ScoreKey = tuple[str, str, str]


def load_scores(path: str | Path) -> dict[ScoreKey, float]:
    """Read hand-assigned usability scores from a CSV with columns
    model,strategy,domain,score.  Scores live in [0, 1]; duplicate keys
    are rejected so a report join is never ambiguous."""
    scores: dict[ScoreKey, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["model", "strategy", "domain", "score"]:
            raise ScoreFormatError(f"bad header: {header!r}")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 4:
                raise ScoreFormatError(f"line {lineno}: expected 4 fields, got {len(row)}")
            model, strategy, domain, raw = row
            try:
                value = float(raw)
            except ValueError as exc:
                raise ScoreFormatError(f"line {lineno}: score {raw!r} is not a number") from exc
            if not 0.0 <= value <= 1.0:
                raise ScoreFormatError(f"line {lineno}: score {value} outside [0, 1]")
            key = (model, strategy, domain)
            if key in scores:
                raise ScoreFormatError(f"line {lineno}: duplicate key {key}")
            scores[key] = value
    return scores


def time_generation(action: Callable[[], T]) -> tuple[T, float]:
    """Run a deferred generation call and return (result, wall_ms) with
    the wall time taken from a monotonic clock bracketing the call."""
    start = time.perf_counter()
    result = action()
    wall_ms = (time.perf_counter() - start) * 1000.0
    return result, wall_ms


@dataclass
class CoherenceScore:
    transition_density: float
    cosine: float
    composite: float


def coherence(text: str, reference: str, embeddings: dict[str, Vector]) -> CoherenceScore:
    """Equal-weight blend of capped marker density and topical cosine,
    both mapped onto [0, 1].  Density saturates at 5 markers per 100
    words; the cosine shifts from [-1, 1]."""
    density = transition_density(text)
    cos = relevance(text, reference, embeddings)
    composite = 0.5 * min(density / 5.0, 1.0) + 0.5 * (cos + 1.0) / 2.0
    return CoherenceScore(transition_density=density, cosine=cos, composite=composite)
