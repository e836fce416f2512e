"""Lexical knowledge graph: entities linked by relation triplets, word
senses with glosses, gloss-overlap disambiguation and definition-based
prompt expansion.

Entity resolution is case-insensitive: the entity id is the casefolded
label and the first label seen is kept for display.  ``is_a`` is the one
relation the completion step understands; everything else is opaque.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import corpus
from .errors import LklmError

IS_A = "is_a"


class KgError(LklmError):
    pass


class NoSenseError(KgError):
    """No sense is stored for the requested lemma/pos pair."""


class KgFormatError(KgError):
    """A serialised graph file does not match the expected shape."""


@dataclass
class Entity:
    id: str
    label: str
    attributes: dict[str, str] = field(default_factory=dict)


@dataclass
class Sense:
    lemma: str
    pos: str
    sense_index: int
    gloss: str
    related: list[tuple[str, str]] = field(default_factory=list)

    def key(self) -> tuple[str, str, int]:
        return (self.lemma, self.pos, self.sense_index)


Triplet = tuple[str, str, str]


@dataclass
class KnowledgeGraph:
    entities: dict[str, Entity] = field(default_factory=dict)
    triplets: list[Triplet] = field(default_factory=list)
    senses: list[Sense] = field(default_factory=list)

    def add_entity(self, label: str, attributes: dict[str, str] | None = None) -> Entity:
        """Resolve ``label`` case-insensitively, creating the entity on
        first sight.  New attribute keys are merged in; existing keys keep
        their first value."""
        eid = label.casefold()
        ent = self.entities.get(eid)
        if ent is None:
            ent = Entity(id=eid, label=label, attributes=dict(attributes or {}))
            self.entities[eid] = ent
        elif attributes:
            for k, v in attributes.items():
                ent.attributes.setdefault(k, v)
        return ent

    def add_triplet(self, head: str, relation: str, tail: str) -> Triplet:
        h = self.add_entity(head).id
        t = self.add_entity(tail).id
        trip = (h, relation, t)
        if trip not in self.triplets:
            self.triplets.append(trip)
        return trip

    def query(
        self,
        head: str | None = None,
        relation: str | None = None,
        tail: str | None = None,
    ) -> list[Triplet]:
        """Triplets matching the given fields; None matches anything.
        Head/tail match case-insensitively."""
        h = head.casefold() if head is not None else None
        t = tail.casefold() if tail is not None else None
        return [
            trip
            for trip in self.triplets
            if (h is None or trip[0] == h)
            and (relation is None or trip[1] == relation)
            and (t is None or trip[2] == t)
        ]

    def add_sense(self, sense: Sense) -> None:
        if all(sense.key() != s.key() for s in self.senses):
            self.senses.append(sense)

    def senses_for(self, lemma: str, pos: str) -> list[Sense]:
        found = [s for s in self.senses if s.lemma == lemma and s.pos == pos]
        return sorted(found, key=lambda s: s.sense_index)


def extract_triplets(sentence: corpus.Sentence) -> list[Triplet]:
    """One candidate triplet per verb: the nearest noun before it as head,
    the nearest noun after it as tail.  Verbs missing either side are
    skipped."""
    tokens = sentence.tokens
    out: list[Triplet] = []
    for i, tok in enumerate(tokens):
        if tok.pos != "VERB":
            continue
        head = next((t.lemma for t in reversed(tokens[:i]) if t.pos == "NOUN"), None)
        tail = next((t.lemma for t in tokens[i + 1 :] if t.pos == "NOUN"), None)
        if head is not None and tail is not None:
            out.append((head, tok.lemma, tail))
    return out


def graph_from_sentences(
    sentences: list[corpus.Sentence],
    senses: list[Sense] | None = None,
) -> KnowledgeGraph:
    kg = KnowledgeGraph()
    for sent in sentences:
        for h, r, t in extract_triplets(sent):
            kg.add_triplet(h, r, t)
    for sense in senses or []:
        kg.add_sense(sense)
    return kg


def complete(kg: KnowledgeGraph) -> list[Triplet]:
    """Propose triplets implied by ``is_a`` generalisation: from (a, r, b)
    and (b, is_a, c) propose (a, r, c) unless already present.  Proposals
    are returned, never inserted."""
    parents: dict[str, list[str]] = {}
    for h, r, t in kg.triplets:
        if r == IS_A:
            parents.setdefault(h, []).append(t)
    existing = set(kg.triplets)
    proposals: list[Triplet] = []
    seen: set[Triplet] = set()
    for h, r, t in kg.triplets:
        for c in parents.get(t, []):
            cand = (h, r, c)
            if cand not in existing and cand not in seen:
                proposals.append(cand)
                seen.add(cand)
    return proposals


def fuse(g1: KnowledgeGraph, g2: KnowledgeGraph) -> KnowledgeGraph:
    """Merge two graphs into a new one.  On any clash (entity attributes,
    duplicate senses) ``g1`` wins; ``g2`` only adds what is missing."""
    out = KnowledgeGraph()
    for ent in g1.entities.values():
        out.add_entity(ent.label, ent.attributes)
    for ent in g2.entities.values():
        out.add_entity(ent.label, ent.attributes)
    for h, r, t in g1.triplets + g2.triplets:
        if (h, r, t) not in out.triplets:
            out.triplets.append((h, r, t))
    for sense in g1.senses + g2.senses:
        out.add_sense(sense)
    return out


def _gloss_lemmas(gloss: str) -> set[str]:
    tokens = [corpus.classify(t) for t in corpus.tokenize(gloss)]
    return set(corpus.content_lemmas(tokens))


def disambiguate(
    lemma: str,
    pos: str,
    context: set[str] | list[str],
    kg: KnowledgeGraph,
) -> Sense:
    """Pick the sense whose gloss shares the most content lemmas with the
    context; ties go to the lowest sense index.  Raises
    :class:`NoSenseError` when the graph has no sense for the pair."""
    candidates = kg.senses_for(lemma, pos)
    if not candidates:
        raise NoSenseError(f"no sense for {lemma!r}/{pos}")
    ctx = set(context)
    best = candidates[0]
    best_overlap = -1
    for sense in candidates:
        overlap = len(_gloss_lemmas(sense.gloss) & ctx)
        if overlap > best_overlap:
            best, best_overlap = sense, overlap
    return best


EXPANDABLE = ("NOUN", "VERB", "ADJ", "ADV")


def _truncate_sentences(text: str, budget: int) -> str:
    if len(corpus.tokenize(text)) <= budget:
        return text
    kept: list[str] = []
    used = 0
    for sent in corpus.split_sentences(text):
        n = len(corpus.tokenize(sent.raw))
        if kept and used + n > budget:
            break
        kept.append(sent.raw)
        used += n
    return " ".join(kept)


def expand_prompt(
    text: str,
    kg: KnowledgeGraph,
    iterations: int = 2,
    budget: int = 512,
) -> str:
    """Definition expansion: replace each content word that has a sense in
    the graph with its disambiguated gloss, repeatedly.

    The disambiguation context is the content-lemma set of the whole
    current text.  After each round the text is truncated at a sentence
    boundary to ``budget`` tokens (always keeping at least one sentence).
    ``iterations=0`` returns the text unchanged.
    """
    for _ in range(iterations):
        tokens = [corpus.classify(t) for t in corpus.tokenize(text)]
        context = set(corpus.content_lemmas(tokens))
        pieces: list[str] = []
        changed = False
        for tok in tokens:
            if tok.pos in EXPANDABLE and kg.senses_for(tok.lemma, tok.pos):
                sense = disambiguate(tok.lemma, tok.pos, context, kg)
                pieces.append(sense.gloss)
                changed = True
            else:
                pieces.append(tok.text)
        text = _truncate_sentences(corpus.detokenize(pieces), budget)
        if not changed:
            break
    return text


def graph_to_dict(kg: KnowledgeGraph) -> dict:
    return {
        "entities": [
            {"id": e.id, "label": e.label, "attributes": dict(sorted(e.attributes.items()))}
            for e in sorted(kg.entities.values(), key=lambda e: e.id)
        ],
        "triplets": [list(t) for t in sorted(kg.triplets)],
        "senses": [
            {
                "lemma": s.lemma,
                "pos": s.pos,
                "sense_index": s.sense_index,
                "gloss": s.gloss,
                "related": [list(r) for r in s.related],
            }
            for s in sorted(kg.senses, key=lambda s: s.key())
        ],
    }


def graph_from_dict(data: dict) -> KnowledgeGraph:
    kg = KnowledgeGraph()
    try:
        for e in data.get("entities", []):
            kg.add_entity(e["label"], e.get("attributes", {}))
        for h, r, t in data.get("triplets", []):
            kg.add_triplet(h, r, t)
        for s in data.get("senses", []):
            kg.add_sense(
                Sense(
                    lemma=s["lemma"],
                    pos=s["pos"],
                    sense_index=int(s["sense_index"]),
                    gloss=s["gloss"],
                    related=[(rel, lem) for rel, lem in s.get("related", [])],
                )
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise KgFormatError(f"bad graph shape: {exc}") from exc
    return kg


def save_graph(kg: KnowledgeGraph, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(graph_to_dict(kg), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def load_graph(path: str | Path) -> KnowledgeGraph:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise KgFormatError(f"not valid JSON: {exc}") from exc
    return graph_from_dict(data)


def load_default_senses() -> KnowledgeGraph:
    """The packaged starter graph: no triplets, a small dictionary of
    manufacturing-flavoured word senses."""
    from importlib import resources

    text = resources.files("lklm.data").joinpath("senses.json").read_text(encoding="utf-8")
    return graph_from_dict(json.loads(text))
