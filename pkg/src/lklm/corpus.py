"""Plain-text ingestion: cleaning, sentence splitting, tokenisation and
rule-based part-of-speech tagging.

The tagger is deliberately small.  It resolves a token through four layers:
a stopword list, a closed-class lexicon (exact match first, then a handful
of inflection folds), suffix heuristics, and finally ``OTHER``.  Lemmas are
lowercased surface forms with plural/inflection folds applied only when the
fold is what matched the lexicon, plus a trailing-``s`` fold for nouns.
"""

from __future__ import annotations

import fnmatch
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import LklmError


class CorpusError(LklmError):
    pass


class DuplicateIdError(CorpusError):
    """Two source files would produce the same document id."""


class EmptySourceError(CorpusError):
    """A source file contains no sentences after cleaning."""


class CorpusFormatError(CorpusError):
    """A serialised corpus file does not match the expected shape."""


POS_TAGS = ("NOUN", "VERB", "ADJ", "ADV", "STOP", "OTHER")


@dataclass
class Token:
    text: str
    lemma: str
    pos: str


@dataclass
class Sentence:
    index: int
    raw: str
    tokens: list[Token] = field(default_factory=list)


@dataclass
class Document:
    id: str
    domain: str
    sentences: list[Sentence] = field(default_factory=list)


@dataclass
class Corpus:
    documents: list[Document] = field(default_factory=list)

    def document_ids(self) -> list[str]:
        return [doc.id for doc in self.documents]

    def get(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise KeyError(doc_id)


def _load_wordlist(name: str) -> frozenset[str]:
    text = resources.files("lklm.data").joinpath(name).read_text(encoding="utf-8")
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


def _load_lexicon() -> dict[str, str]:
    text = resources.files("lklm.data").joinpath("lexicon.json").read_text(encoding="utf-8")
    table: dict[str, str] = {}
    for pos, words in json.loads(text).items():
        for word in words:
            table[word] = pos
    return table


STOPWORDS = _load_wordlist("stopwords.txt")
FILLER_HEADINGS = _load_wordlist("fillers.txt")
LEXICON = _load_lexicon()

# Cleaning passes, applied in order.  Each pass only removes or shrinks
# text, which keeps clean_text idempotent and never longer than its input.
FILLER_LINE_RE = re.compile(
    r"^[ \t]*(?:" + "|".join(sorted(FILLER_HEADINGS)) + r")[ \t]*[:.]?[ \t]*$\n?",
    re.IGNORECASE | re.MULTILINE,
)
BRACKET_CITE_RE = re.compile(r"\[\s*\d+(?:\s*[,;–-]\s*\d+)*\s*\]")
AUTHOR_YEAR_CITE_RE = re.compile(
    r"\(\s*[A-Z][A-Za-z.&\s-]*?(?:et\s+al\.?)?\s*,\s*(?:19|20)\d\d[a-z]?\s*\)"
)
EMAIL_RE = re.compile(r"\b[\w.+-]+@[\w-]+(?:\.[\w-]+)+\b")
PHONE_RES = (
    re.compile(r"\(\d{3}\)\s?\d{3}[-.]\d{4}"),
    re.compile(r"\+?\b\d{1,4}(?:[-.]\d{2,4}){2,}\b"),
)
SPACE_BEFORE_PUNCT_RE = re.compile(r"\s+([.,;:!?])")
WHITESPACE_RE = re.compile(r"\s+")


def clean_text(text: str) -> str:
    """Strip citation markers, contact details and filler headings, then
    normalise whitespace.  Idempotent; output is never longer than input."""
    text = FILLER_LINE_RE.sub("", text)
    text = BRACKET_CITE_RE.sub("", text)
    text = AUTHOR_YEAR_CITE_RE.sub("", text)
    text = EMAIL_RE.sub("", text)
    for pat in PHONE_RES:
        text = pat.sub("", text)
    text = WHITESPACE_RE.sub(" ", text)
    text = SPACE_BEFORE_PUNCT_RE.sub(r"\1", text)
    return text.strip()


# Words before a period that do not end a sentence.
ABBREVIATIONS = frozenset(
    "e.g i.e etc et al cf fig figs no nos vs dr mr mrs ms st inc ltd co".split()
)
TERMINATOR_RE = re.compile(r"[.!?]+")


def _is_abbreviation(text: str, end: int) -> bool:
    """True when the terminator ending at ``end`` follows an abbreviation."""
    head = text[:end].rstrip(".!?")
    match = re.search(r"[\w.]+$", head)
    if not match:
        return False
    word = match.group().lower().rstrip(".")
    return word in ABBREVIATIONS or word.replace(".", "") in ABBREVIATIONS


def split_sentences(text: str) -> list[Sentence]:
    """Split cleaned text on ., ! or ? when followed by an uppercase start
    or end of text, skipping common abbreviations.  Tokens are left empty;
    run :func:`tag_pos` to fill them."""
    sentences: list[Sentence] = []
    start = 0
    for match in TERMINATOR_RE.finditer(text):
        end = match.end()
        rest = text[end:]
        at_eot = not rest.strip()
        follows = re.match(r"\s+[\"'(]?[A-Z0-9]", rest)
        if not at_eot and not follows:
            continue
        if _is_abbreviation(text, match.start()):
            continue
        raw = text[start:end].strip()
        if raw:
            sentences.append(Sentence(index=len(sentences), raw=raw))
        start = end
    tail = text[start:].strip()
    if tail:
        sentences.append(Sentence(index=len(sentences), raw=tail))
    return sentences


WORD_RE = re.compile(r"[A-Za-z0-9]+(?:['-][A-Za-z0-9]+)*|[^\sA-Za-z0-9]")


def tokenize(raw: str) -> list[str]:
    """Surface tokens: words keep internal hyphens/apostrophes, every other
    non-space character becomes its own token."""
    return WORD_RE.findall(raw)


def _s_fold(word: str) -> str:
    if len(word) > 3 and word.endswith("s") and not word.endswith("ss"):
        return word[:-1]
    return word


def _fold_candidates(word: str) -> Iterable[str]:
    """Lemma candidates for lexicon lookup, most specific first."""
    if len(word) > 4 and word.endswith("ies"):
        yield word[: -len("ies")] + "y"
    if len(word) > 4 and word.endswith("es"):
        yield word[:-2]
    folded = _s_fold(word)
    if folded != word:
        yield folded
    if len(word) > 5 and word.endswith("ing"):
        base = word[:-3]
        yield base
        yield base + "e"
        if len(base) > 2 and base[-1] == base[-2]:
            yield base[:-1]
    if len(word) > 3 and word.endswith("ed"):
        base = word[:-2]
        yield base
        yield base + "e"
        if len(base) > 2 and base[-1] == base[-2]:
            yield base[:-1]


SUFFIX_RULES = (
    ("ing", "VERB"),
    ("ed", "VERB"),
    ("ize", "VERB"),
    ("tion", "NOUN"),
    ("ment", "NOUN"),
    ("ness", "NOUN"),
    ("ity", "NOUN"),
    ("ous", "ADJ"),
    ("ful", "ADJ"),
    ("able", "ADJ"),
    ("ly", "ADV"),
)


def _suffix_class(word: str) -> str | None:
    for suffix, pos in SUFFIX_RULES:
        if len(word) > len(suffix) + 1 and word.endswith(suffix):
            return pos
    return None


def classify(text: str) -> Token:
    """Assign a part of speech and lemma to one surface token."""
    lower = text.lower()
    if not re.search(r"[a-z0-9]", lower):
        return Token(text=text, lemma=text, pos="OTHER")
    if lower in STOPWORDS:
        return Token(text=text, lemma=lower, pos="STOP")
    pos = LEXICON.get(lower)
    if pos is not None:
        lemma = _s_fold(lower) if pos == "NOUN" else lower
        return Token(text=text, lemma=lemma, pos=pos)
    for cand in _fold_candidates(lower):
        pos = LEXICON.get(cand)
        if pos is not None:
            lemma = _s_fold(cand) if pos == "NOUN" else cand
            return Token(text=text, lemma=lemma, pos=pos)
    for form in (lower, _s_fold(lower)):
        pos = _suffix_class(form)
        if pos is not None:
            lemma = _s_fold(form) if pos == "NOUN" else form
            return Token(text=text, lemma=lemma, pos=pos)
    return Token(text=text, lemma=lower, pos="OTHER")


def tag_pos(sentence: Sentence) -> Sentence:
    """Tokenise ``sentence.raw`` and fill ``sentence.tokens`` in place."""
    sentence.tokens = [classify(t) for t in tokenize(sentence.raw)]
    return sentence


def detokenize(tokens: Iterable[str]) -> str:
    """Inverse-ish of :func:`tokenize`: space-join, then pull punctuation
    back onto the preceding word."""
    text = " ".join(tokens)
    text = SPACE_BEFORE_PUNCT_RE.sub(r"\1", text)
    text = re.sub(r"([(\[]) ", r"\1", text)
    text = re.sub(r" ([)\]])", r"\1", text)
    return text


def content_lemmas(tokens: Iterable[Token]) -> list[str]:
    """Lemmas of tokens that carry content: not stopwords, not bare
    punctuation.  Unknown words count; they often matter most."""
    return [
        t.lemma
        for t in tokens
        if t.pos != "STOP" and any(ch.isalnum() for ch in t.text)
    ]


def process_text(text: str) -> list[Sentence]:
    """clean -> split -> tag, the full path from raw text to sentences."""
    return [tag_pos(s) for s in split_sentences(clean_text(text))]


def build_corpus(
    root: str | Path,
    domain_map: Sequence[tuple[str, str]],
) -> Corpus:
    """Build a corpus from every ``*.txt`` under ``root`` (recursive).

    ``domain_map`` is an ordered list of ``(glob_pattern, domain)`` pairs
    matched against the file path relative to ``root`` (posix form); the
    first match wins and unmatched files are skipped.  The document id is
    the file stem.  Raises :class:`DuplicateIdError` when two files share a
    stem and :class:`EmptySourceError` when a matched file yields no
    sentences after cleaning.
    """
    root = Path(root)
    documents: dict[str, Document] = {}
    for path in sorted(root.rglob("*.txt")):
        rel = path.relative_to(root).as_posix()
        domain = None
        for pattern, name in domain_map:
            if fnmatch.fnmatch(rel, pattern):
                domain = name
                break
        if domain is None:
            continue
        doc_id = path.stem
        if doc_id in documents:
            raise DuplicateIdError(f"duplicate document id {doc_id!r} from {rel}")
        sentences = process_text(path.read_text(encoding="utf-8"))
        if not sentences:
            raise EmptySourceError(f"no sentences in {rel}")
        documents[doc_id] = Document(id=doc_id, domain=domain, sentences=sentences)
    return Corpus(documents=[documents[k] for k in sorted(documents)])


def corpus_to_dict(corpus: Corpus) -> dict:
    return {
        "documents": [
            {
                "id": doc.id,
                "domain": doc.domain,
                "sentences": [
                    {
                        "index": s.index,
                        "raw": s.raw,
                        "tokens": [
                            {"text": t.text, "lemma": t.lemma, "pos": t.pos}
                            for t in s.tokens
                        ],
                    }
                    for s in doc.sentences
                ],
            }
            for doc in sorted(corpus.documents, key=lambda d: d.id)
        ]
    }


def corpus_from_dict(data: dict) -> Corpus:
    try:
        documents = []
        for d in data["documents"]:
            sentences = []
            for s in d["sentences"]:
                tokens = [
                    Token(text=t["text"], lemma=t["lemma"], pos=t["pos"])
                    for t in s["tokens"]
                ]
                for t in tokens:
                    if t.pos not in POS_TAGS:
                        raise CorpusFormatError(f"unknown pos tag {t.pos!r}")
                sentences.append(Sentence(index=s["index"], raw=s["raw"], tokens=tokens))
            documents.append(Document(id=d["id"], domain=d["domain"], sentences=sentences))
    except (KeyError, TypeError) as exc:
        raise CorpusFormatError(f"bad corpus shape: {exc}") from exc
    return Corpus(documents=documents)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(corpus_to_dict(corpus), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def load_corpus(path: str | Path) -> Corpus:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"not valid JSON: {exc}") from exc
    return corpus_from_dict(data)
