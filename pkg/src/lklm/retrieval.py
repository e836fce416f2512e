"""Keyword retrieval over a tagged corpus.

Queries reduce to their noun and verb lemmas.  A sentence scores by how
many distinct query keywords appear among its token lemmas; ties are
broken by document id, then sentence position, so results are fully
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import corpus as corpus_mod
from .corpus import Corpus, Sentence

KEYWORD_POS = ("NOUN", "VERB")


@dataclass
class Hit:
    doc_id: str
    index: int
    match_count: int
    sentence: Sentence


def keywords(text: str) -> list[str]:
    """Distinct noun/verb lemmas of ``text`` in first-appearance order."""
    seen: list[str] = []
    for surface in corpus_mod.tokenize(text):
        tok = corpus_mod.classify(surface)
        if tok.pos in KEYWORD_POS and tok.lemma not in seen:
            seen.append(tok.lemma)
    return seen


def sentence_lemmas(sentence: Sentence) -> set[str]:
    return {t.lemma for t in sentence.tokens}


def retrieve(
    corpus: Corpus,
    query: str,
    domain: str | None = None,
    limit: int | None = None,
) -> list[Hit]:
    """Sentences containing at least one query keyword, ordered by
    (match count desc, doc id asc, sentence index asc).  ``domain``
    restricts the search; ``limit`` truncates the result."""
    terms = set(keywords(query))
    if not terms:
        return []
    hits: list[Hit] = []
    for doc in corpus.documents:
        if domain is not None and doc.domain != domain:
            continue
        for sent in doc.sentences:
            count = len(terms & sentence_lemmas(sent))
            if count > 0:
                hits.append(Hit(doc.id, sent.index, count, sent))
    hits.sort(key=lambda h: (-h.match_count, h.doc_id, h.index))
    if limit is not None:
        hits = hits[:limit]
    return hits
