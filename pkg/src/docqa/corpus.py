"""Page-structured document corpus: loading, metadata, sidecar round-trips.

Documents enter as pre-extracted text, either a ``<name>.pages.jsonl``
sidecar (one ``{"page": int, "text": str}`` object per line, optionally
accompanied by ``<name>.meta.json``) or a plain ``.txt``/``.md`` file whose
pages are split on form-feed characters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

META_SUFFIX = ".meta.json"
PAGES_SUFFIX = ".pages.jsonl"
PLAIN_SUFFIXES = (".txt", ".md")

METADATA_COLUMNS = ("File", "Title", "Author", "CreationDate", "Pages", "FileSize")


class CorpusError(Exception):
    """Raised when a corpus directory or document source cannot be loaded."""


@dataclass(frozen=True)
class PageText:
    """One page of a document; ``page_number`` is 1-based and contiguous."""

    page_number: int
    text: str


@dataclass(frozen=True)
class DocumentMetadata:
    title: str = ""
    author: str = ""
    creation_date: str = ""
    page_count: int = 0
    file_size_bytes: int = 0


@dataclass(frozen=True)
class DocumentRecord:
    """A corpus document: stable id, file-level metadata, ordered pages."""

    doc_id: str
    metadata: DocumentMetadata
    pages: tuple[PageText, ...]


@dataclass(frozen=True)
class DocumentCollection:
    """Immutable set of documents ordered by doc_id; exact-match lookups."""

    root: str
    documents: tuple[DocumentRecord, ...]
    _by_id: dict[str, DocumentRecord] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_by_id", {d.doc_id: d for d in self.documents})

    def __len__(self) -> int:
        return len(self.documents)

    def get(self, doc_id: str) -> DocumentRecord | None:
        return self._by_id.get(doc_id)


def _relative_id(path: Path, root: Path) -> str:
    return path.relative_to(root).as_posix()


def _load_meta_json(path: Path) -> dict:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise CorpusError(f"{path}: unreadable metadata file: {exc}") from exc
    if not isinstance(raw, dict):
        raise CorpusError(f"{path}: metadata must be a JSON object")
    return raw


def _build_metadata(source: Path, meta: dict, page_count: int) -> DocumentMetadata:
    size = meta.get("file_size_bytes")
    if size is None:
        size = source.stat().st_size
    return DocumentMetadata(
        title=str(meta.get("title", "")),
        author=str(meta.get("author", "")),
        creation_date=str(meta.get("creation_date", "")),
        page_count=page_count,
        file_size_bytes=int(size),
    )


def _load_sidecar(path: Path, root: Path) -> DocumentRecord:
    doc_id = _relative_id(path, root)[: -len(PAGES_SUFFIX)]
    pages: list[PageText] = []
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except ValueError as exc:
                raise CorpusError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict) or not isinstance(obj.get("page"), int) \
                    or not isinstance(obj.get("text"), str):
                raise CorpusError(
                    f"{path}: line {lineno}: expected object with int 'page' and str 'text'"
                )
            expected = len(pages) + 1
            if obj["page"] != expected:
                raise CorpusError(
                    f"{path}: line {lineno}: page {obj['page']} out of order (expected {expected})"
                )
            pages.append(PageText(page_number=obj["page"], text=obj["text"]))
    meta_path = path.with_name(path.name[: -len(PAGES_SUFFIX)] + META_SUFFIX)
    meta = _load_meta_json(meta_path) if meta_path.exists() else {}
    return DocumentRecord(
        doc_id=doc_id,
        metadata=_build_metadata(path, meta, len(pages)),
        pages=tuple(pages),
    )


def _load_plain(path: Path, root: Path) -> DocumentRecord:
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CorpusError(f"{path}: unreadable text file: {exc}") from exc
    pages = tuple(
        PageText(page_number=i, text=chunk)
        for i, chunk in enumerate(text.split("\f"), start=1)
    )
    return DocumentRecord(
        doc_id=_relative_id(path, root),
        metadata=_build_metadata(path, {}, len(pages)),
        pages=pages,
    )


def load_corpus(root: str | Path) -> DocumentCollection:
    """Load every recognized document source under ``root``.

    Recognized sources are ``*.pages.jsonl`` sidecars and plain ``.txt``/``.md``
    files.  Documents are ordered lexicographically by doc_id.
    """
    root_path = Path(root)
    if not root_path.is_dir():
        raise CorpusError(f"{root_path}: not a readable directory")
    records: list[DocumentRecord] = []
    for path in sorted(root_path.rglob("*")):
        if not path.is_file():
            continue
        name = path.name
        if name.endswith(PAGES_SUFFIX):
            records.append(_load_sidecar(path, root_path))
        elif name.endswith(META_SUFFIX):
            continue
        elif path.suffix in PLAIN_SUFFIXES:
            records.append(_load_plain(path, root_path))
    records.sort(key=lambda r: r.doc_id)
    seen: set[str] = set()
    for record in records:
        if record.doc_id in seen:
            raise CorpusError(f"duplicate doc_id {record.doc_id!r}")
        seen.add(record.doc_id)
    return DocumentCollection(root=str(root_path), documents=tuple(records))


def save_document(record: DocumentRecord, root: str | Path) -> Path:
    """Write ``record`` in sidecar format under ``root``; returns the sidecar path.

    A reload of the written files yields an identical record, including the
    recorded file size.
    """
    root_path = Path(root)
    sidecar = root_path / (record.doc_id + PAGES_SUFFIX)
    sidecar.parent.mkdir(parents=True, exist_ok=True)
    with sidecar.open("w", encoding="utf-8") as handle:
        for page in record.pages:
            handle.write(json.dumps({"page": page.page_number, "text": page.text}) + "\n")
    meta_path = root_path / (record.doc_id + META_SUFFIX)
    meta = {
        "title": record.metadata.title,
        "author": record.metadata.author,
        "creation_date": record.metadata.creation_date,
        "file_size_bytes": record.metadata.file_size_bytes,
    }
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return sidecar


@dataclass(frozen=True)
class MetadataTable:
    """Structured rows plus a deterministic tab-separated rendering."""

    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    @property
    def rendered(self) -> str:
        lines = ["\t".join(self.columns)]
        lines.extend("\t".join(row) for row in self.rows)
        return "\n".join(lines)


def corpus_metadata(collection: DocumentCollection) -> MetadataTable:
    """One row per document, ordered by doc_id; empty collection renders header only."""
    rows = tuple(
        (
            "./" + doc.doc_id,
            doc.metadata.title,
            doc.metadata.author,
            doc.metadata.creation_date,
            str(doc.metadata.page_count),
            str(doc.metadata.file_size_bytes),
        )
        for doc in collection.documents
    )
    return MetadataTable(columns=METADATA_COLUMNS, rows=rows)
