"""Deterministic lexical retrieval over a theory corpus.

Documents are split into overlapping word windows and scored with Okapi
BM25. Everything here is pure and order-stable so that the same index and
query always produce the same ranking.
"""

from __future__ import annotations

import json
import logging
import math
import re
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyCorpus, IndexFormatError, InvalidParams, UnknownChunk
from .types import RetrievalResult

log = logging.getLogger(__name__)

INDEX_FORMAT_VERSION = 1
DEFAULT_MAX_WORDS = 300
DEFAULT_OVERLAP_WORDS = 50
DEFAULT_K1 = 1.2
DEFAULT_B = 0.75
DEFAULT_TOP_K = 5

_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs; no stemming, no stopword removal."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    body: str

    def __post_init__(self) -> None:
        if not self.body.strip():
            raise InvalidParams(f"document {self.doc_id!r} has an empty body")


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    text: str
    word_count: int


def chunk_document(
    doc: Document,
    max_words: int = DEFAULT_MAX_WORDS,
    overlap_words: int = DEFAULT_OVERLAP_WORDS,
) -> list[Chunk]:
    """Greedy whitespace-word windows of ``max_words`` sharing ``overlap_words``."""
    if max_words < 1 or not 0 <= overlap_words < max_words:
        raise InvalidParams(
            f"need 0 <= overlap_words < max_words, got overlap={overlap_words}, max={max_words}"
        )
    words = doc.body.split()
    step = max_words - overlap_words
    chunks = []
    start = 0
    while True:
        window = words[start : start + max_words]
        chunks.append(
            Chunk(
                chunk_id=f"{doc.doc_id}#{len(chunks):04d}",
                doc_id=doc.doc_id,
                text=" ".join(window),
                word_count=len(window),
            )
        )
        if start + max_words >= len(words):
            break
        start += step
    return chunks


@dataclass(frozen=True)
class KnowledgeIndex:
    chunks: tuple[Chunk, ...]
    term_doc_freq: dict[str, int]
    chunk_term_freq: dict[str, Counter]
    avg_chunk_len: float
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    _by_id: dict[str, Chunk] = field(default_factory=dict, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.chunks)

    def chunk(self, chunk_id: str) -> Chunk:
        try:
            return self._by_id[chunk_id]
        except KeyError:
            raise UnknownChunk(chunk_id) from None

    def idf(self, term: str) -> float:
        n = len(self.chunks)
        df = self.term_doc_freq.get(term, 0)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))


def build_index(chunks: Sequence[Chunk], k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> KnowledgeIndex:
    if not chunks:
        raise EmptyCorpus("cannot build an index from zero chunks")
    if k1 <= 0 or not 0 <= b <= 1:
        raise InvalidParams(f"need k1 > 0 and 0 <= b <= 1, got k1={k1}, b={b}")
    by_id = {}
    tf: dict[str, Counter] = {}
    df: Counter = Counter()
    for c in chunks:
        if c.chunk_id in by_id:
            raise InvalidParams(f"duplicate chunk id {c.chunk_id!r}")
        by_id[c.chunk_id] = c
        counts = Counter(tokenize(c.text))
        tf[c.chunk_id] = counts
        df.update(counts.keys())
    avg = sum(c.word_count for c in chunks) / len(chunks)
    if avg <= 0:
        raise EmptyCorpus("all chunks are empty")
    return KnowledgeIndex(
        chunks=tuple(chunks),
        term_doc_freq=dict(df),
        chunk_term_freq=tf,
        avg_chunk_len=avg,
        k1=k1,
        b=b,
        _by_id=by_id,
    )


def bm25_score(idx: KnowledgeIndex, query: str, chunk_id: str) -> float:
    """Okapi BM25; each query token contributes once per occurrence in the query."""
    chunk = idx.chunk(chunk_id)
    tf = idx.chunk_term_freq[chunk_id]
    norm = idx.k1 * (1.0 - idx.b + idx.b * chunk.word_count / idx.avg_chunk_len)
    score = 0.0
    for term in tokenize(query):
        f = tf.get(term, 0)
        if f:
            score += idx.idf(term) * f * (idx.k1 + 1.0) / (f + norm)
    return score


def retrieve(idx: KnowledgeIndex, query: str, k: int = DEFAULT_TOP_K) -> list[RetrievalResult]:
    """Top-``k`` chunks by score, ties broken by chunk id; zero scores are dropped."""
    if k < 1:
        raise InvalidParams(f"k must be >= 1, got {k}")
    terms = set(tokenize(query))
    # only chunks sharing a term can score above zero
    candidates = [c for c in idx.chunks if terms & idx.chunk_term_freq[c.chunk_id].keys()]
    scored = [(bm25_score(idx, query, c.chunk_id), c) for c in candidates]
    scored = [(s, c) for s, c in scored if s > 0.0]
    scored.sort(key=lambda sc: (-sc[0], sc[1].chunk_id))
    return [RetrievalResult(c.chunk_id, s, c.text) for s, c in scored[:k]]


# --- corpus & persistence ----------------------------------------------------


def load_corpus(directory: str | Path, pattern: str = "*") -> list[Document]:
    """One Document per plain-text file; the file stem becomes the doc id."""
    directory = Path(directory)
    if not directory.is_dir():
        raise EmptyCorpus(f"{directory} is not a directory")
    docs = []
    for path in sorted(p for p in directory.glob(pattern) if p.is_file()):
        body = path.read_text(encoding="utf-8")
        if not body.strip():
            log.warning("skipping empty corpus file %s", path)
            continue
        docs.append(Document(doc_id=path.stem, title=path.stem, body=body))
    if not docs:
        raise EmptyCorpus(f"no non-empty text files in {directory}")
    return docs


def index_corpus(
    docs: Iterable[Document],
    max_words: int = DEFAULT_MAX_WORDS,
    overlap_words: int = DEFAULT_OVERLAP_WORDS,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> KnowledgeIndex:
    chunks: list[Chunk] = []
    for doc in docs:
        chunks.extend(chunk_document(doc, max_words, overlap_words))
    return build_index(chunks, k1=k1, b=b)


def save_index(idx: KnowledgeIndex, path: str | Path) -> Path:
    """Persist chunks and parameters as JSON; term statistics are rebuilt on load."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": "rephrase-agents-bm25-index",
        "format_version": INDEX_FORMAT_VERSION,
        "params": {"k1": idx.k1, "b": idx.b},
        "chunks": [
            {"chunk_id": c.chunk_id, "doc_id": c.doc_id, "text": c.text, "word_count": c.word_count}
            for c in idx.chunks
        ],
    }
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=1), encoding="utf-8")
    return path


def load_index(path: str | Path) -> KnowledgeIndex:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IndexFormatError(f"{path}: not a JSON index ({exc.msg})") from None
    version = payload.get("format_version") if isinstance(payload, dict) else None
    if version != INDEX_FORMAT_VERSION:
        raise IndexFormatError(f"{path}: unsupported index format version {version!r}")
    chunks = [Chunk(**c) for c in payload["chunks"]]
    return build_index(chunks, **payload["params"])
