"""Baseline RAG pipeline: fixed-token chunking with overlap, deterministic
feature-hash embeddings, brute-force cosine retrieval and grounded answering.

A token is a whitespace-delimited word; pages are joined with a newline
before chunking, so chunks may span page boundaries.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .corpus import DocumentRecord
from .llm import ChatBackend, ChatRequest

DEFAULT_CHUNK_TOKENS = 300
DEFAULT_OVERLAP_FRACTION = 0.2
DEFAULT_EMBED_DIM = 1024
DEFAULT_TOP_K = 5

INDEX_FORMAT_TAG = "docqa-vector-index/1"

NO_CONTEXT_SENTINEL = "No context passages were retrieved."

RAG_SYSTEM_PROMPT = (
    "Answer strictly from the numbered context passages provided by the user. "
    "Do not bring in outside knowledge or cite anything beyond the passages. "
    "If the passages are insufficient to answer, say that you cannot answer."
)


class RagError(Exception):
    pass


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    token_start: int
    token_end: int
    text: str
    page_span: tuple[int, int]

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "doc_id": self.doc_id,
            "token_start": self.token_start,
            "token_end": self.token_end,
            "text": self.text,
            "page_span": list(self.page_span),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Chunk":
        return cls(
            chunk_id=obj["chunk_id"],
            doc_id=obj["doc_id"],
            token_start=obj["token_start"],
            token_end=obj["token_end"],
            text=obj["text"],
            page_span=tuple(obj["page_span"]),
        )


def chunk_document(
    doc: DocumentRecord,
    chunk_tokens: int = DEFAULT_CHUNK_TOKENS,
    overlap_fraction: float = DEFAULT_OVERLAP_FRACTION,
) -> list[Chunk]:
    """Slice ``doc`` into token windows of ``chunk_tokens`` words.

    Window starts advance by ``chunk_tokens - round(overlap_fraction *
    chunk_tokens)`` tokens (clamped to at least 1); generation stops with the
    first window whose end reaches the final token.  Chunk text rejoins the
    window's words with single spaces.
    """
    if chunk_tokens <= 0:
        raise ValueError("chunk_tokens must be positive")
    if not 0 <= overlap_fraction < 1:
        raise ValueError("overlap_fraction must be in [0, 1)")
    tokens: list[str] = []
    token_pages: list[int] = []
    for page in doc.pages:
        for word in page.text.split():
            tokens.append(word)
            token_pages.append(page.page_number)
    total = len(tokens)
    if total == 0:
        return []
    stride = max(1, chunk_tokens - round(overlap_fraction * chunk_tokens))
    chunks: list[Chunk] = []
    start = 0
    while True:
        end = min(start + chunk_tokens, total)
        chunks.append(
            Chunk(
                chunk_id=f"{doc.doc_id}#{start}",
                doc_id=doc.doc_id,
                token_start=start,
                token_end=end,
                text=" ".join(tokens[start:end]),
                page_span=(token_pages[start], token_pages[end - 1]),
            )
        )
        if start + chunk_tokens >= total:
            break
        start += stride
    return chunks


class Embedder(Protocol):
    dimension: int
    tag: str

    def embed(self, text: str) -> np.ndarray: ...


class LocalHashEmbedder:
    """Feature-hashed bag of words: lowercase, split on non-word characters,
    signed-hash each token into one of ``dimension`` buckets, L2-normalize.

    Hashing uses blake2b so vectors are identical across runs and platforms;
    text with no tokens maps to the zero vector.
    """

    def __init__(self, dimension: int = DEFAULT_EMBED_DIM):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.tag = f"feature-hash-v1/{dimension}"

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        for token in re.split(r"\W+", text.lower()):
            if not token:
                continue
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            value = int.from_bytes(digest, "big")
            sign = 1.0 if (value >> 63) & 1 == 0 else -1.0
            vec[value % self.dimension] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0:
            vec /= norm
        return vec


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of two vectors; 0.0 when either has zero norm."""
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return float(np.dot(a, b) / (norm_a * norm_b))


@dataclass(frozen=True)
class VectorIndex:
    dimension: int
    embedder_tag: str
    entries: tuple[tuple[str, np.ndarray], ...]
    chunks: dict[str, Chunk]

    def __len__(self) -> int:
        return len(self.entries)


def build_index(chunks: list[Chunk], embedder: Embedder) -> VectorIndex:
    """Embed every chunk in order; reject vectors of the wrong dimension."""
    entries: list[tuple[str, np.ndarray]] = []
    store: dict[str, Chunk] = {}
    for chunk in chunks:
        vec = np.asarray(embedder.embed(chunk.text), dtype=np.float64)
        if vec.shape != (embedder.dimension,):
            raise RagError(
                f"embedding for {chunk.chunk_id!r} has dimension {vec.shape}, "
                f"expected ({embedder.dimension},)"
            )
        entries.append((chunk.chunk_id, vec))
        store[chunk.chunk_id] = chunk
    return VectorIndex(
        dimension=embedder.dimension,
        embedder_tag=embedder.tag,
        entries=tuple(entries),
        chunks=store,
    )


def index_to_json(index: VectorIndex) -> str:
    payload = {
        "format": INDEX_FORMAT_TAG,
        "dimension": index.dimension,
        "count": len(index.entries),
        "embedder": index.embedder_tag,
        "entries": [
            {"chunk_id": cid, "vector": [float(x) for x in vec]}
            for cid, vec in index.entries
        ],
        "chunks": [index.chunks[cid].to_dict() for cid, _ in index.entries],
    }
    return json.dumps(payload, sort_keys=True)


def save_index(index: VectorIndex, path: str | Path) -> None:
    Path(path).write_text(index_to_json(index) + "\n", encoding="utf-8")


def load_index(path: str | Path) -> VectorIndex:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != INDEX_FORMAT_TAG:
        raise RagError(f"unsupported index format {payload.get('format')!r}")
    chunks = {c["chunk_id"]: Chunk.from_dict(c) for c in payload["chunks"]}
    entries = tuple(
        (e["chunk_id"], np.asarray(e["vector"], dtype=np.float64))
        for e in payload["entries"]
    )
    return VectorIndex(
        dimension=payload["dimension"],
        embedder_tag=payload["embedder"],
        entries=entries,
        chunks=chunks,
    )


@dataclass(frozen=True)
class RetrievedChunk:
    chunk: Chunk
    score: float


def retrieve(
    index: VectorIndex,
    question: str,
    embedder: Embedder,
    k: int = DEFAULT_TOP_K,
) -> list[RetrievedChunk]:
    """Rank every entry by cosine similarity to the question, descending;
    ties break on ascending chunk_id; returns min(k, len(index)) results."""
    if k < 1:
        raise ValueError("k must be >= 1")
    query_vec = embedder.embed(question)
    scored = [
        (cosine_similarity(query_vec, vec), cid) for cid, vec in index.entries
    ]
    scored.sort(key=lambda item: (-item[0], item[1]))
    return [
        RetrievedChunk(chunk=index.chunks[cid], score=score)
        for score, cid in scored[:k]
    ]


@dataclass(frozen=True)
class AnswerRecord:
    answer: str
    contexts: tuple[str, ...]


def build_rag_prompt(question: str, contexts: list[str]) -> tuple[dict[str, str], ...]:
    if contexts:
        passages = "\n\n".join(
            f"[{i}] {text}" for i, text in enumerate(contexts, start=1)
        )
    else:
        passages = NO_CONTEXT_SENTINEL + " Say that you cannot answer."
    user = f"Context passages:\n{passages}\n\nQuestion: {question}"
    return (
        {"role": "system", "content": RAG_SYSTEM_PROMPT},
        {"role": "user", "content": user},
    )


def rag_answer(
    question: str,
    retrieved: list[RetrievedChunk],
    llm: ChatBackend,
    temperature: float = 0.001,
    max_tokens: int = 1024,
) -> AnswerRecord:
    """One grounded-answer LLM call over the ranked chunks."""
    contexts = [r.chunk.text for r in retrieved]
    request = ChatRequest(
        messages=build_rag_prompt(question, contexts),
        temperature=temperature,
        max_tokens=max_tokens,
    )
    response = llm.chat(request)
    return AnswerRecord(answer=response.text, contexts=tuple(contexts))


@dataclass(frozen=True)
class RagConfig:
    chunk_tokens: int = DEFAULT_CHUNK_TOKENS
    overlap_fraction: float = DEFAULT_OVERLAP_FRACTION
    embed_dim: int = DEFAULT_EMBED_DIM
    top_k: int = DEFAULT_TOP_K
    temperature: float = 0.001
    max_tokens: int = 1024
