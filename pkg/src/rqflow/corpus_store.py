"""On-disk corpus artifacts and their manifest.

Three files plus a manifest, all written atomically (temp + rename):

* ``records.jsonl``   one PaperRecord per line, ascending paper_id
* ``edges.csv``       header then ``citing_id,cited_id`` rows, sorted
* ``embeddings.bin``  JSON header line {dim, count, paper_ids} followed
                      by count*dim little-endian float32, row-major
* ``manifest.json``   creation time, corpus spec echo, counts, sha256 of
                      each artifact

Loads re-verify manifest counts and checksums, so a truncated or
hand-edited artifact fails fast instead of silently skewing retrieval.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .llm import EmbeddingVector
from .retrieval import CitationGraph, EmbeddingIndex, PaperRecord

RECORDS_FILE = "records.jsonl"
EDGES_FILE = "edges.csv"
EMBEDDINGS_FILE = "embeddings.bin"
MANIFEST_FILE = "manifest.json"


class CorpusIoError(Exception):
    pass


class ConsistencyError(CorpusIoError):
    pass


@dataclass(frozen=True)
class CorpusSpec:
    """What to fetch: venue list, size cap, metadata fields, pacing."""

    venues: tuple[str, ...]
    max_papers: int = 2043
    fields_requested: tuple[str, ...] = (
        "title",
        "abstract",
        "authors",
        "tldr",
        "url",
        "year",
        "venue",
    )
    rate_limit: float = 1.0

    def __post_init__(self) -> None:
        if not self.venues:
            raise ValueError("at least one venue required")
        if self.max_papers < 1:
            raise ValueError("max_papers must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "venues": list(self.venues),
            "max_papers": self.max_papers,
            "fields_requested": list(self.fields_requested),
            "rate_limit": self.rate_limit,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CorpusSpec":
        return cls(
            venues=tuple(d["venues"]),
            max_papers=d.get("max_papers", 2043),
            fields_requested=tuple(d.get("fields_requested", cls.fields_requested)),
            rate_limit=d.get("rate_limit", 1.0),
        )


@dataclass
class CorpusManifest:
    created_at: float
    spec: CorpusSpec
    paper_count: int
    embedding_dim: int
    checksums: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "created_at": self.created_at,
            "spec": self.spec.to_dict(),
            "paper_count": self.paper_count,
            "embedding_dim": self.embedding_dim,
            "checksums": self.checksums,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CorpusManifest":
        return cls(
            created_at=d["created_at"],
            spec=CorpusSpec.from_dict(d["spec"]),
            paper_count=d["paper_count"],
            embedding_dim=d["embedding_dim"],
            checksums=dict(d["checksums"]),
        )


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def persist_corpus(
    records: Iterable[PaperRecord],
    graph: CitationGraph,
    index: EmbeddingIndex,
    out_dir: str | Path,
    spec: CorpusSpec,
    created_at: float = 0.0,
) -> CorpusManifest:
    """Write the three artifacts and manifest; load(persist(x)) == x."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ordered = sorted(records, key=lambda r: r.paper_id)
    ids = [r.paper_id for r in ordered]
    if set(ids) != set(index.vectors):
        raise ConsistencyError(
            f"records ({len(ids)}) and embedding rows ({len(index.vectors)}) name different papers"
        )
    if set(ids) != set(graph.papers):
        raise ConsistencyError("records and citation-graph papers disagree")

    records_blob = "".join(
        json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False) + "\n" for r in ordered
    ).encode("utf-8")
    _atomic_write(out / RECORDS_FILE, records_blob)

    edge_lines = ["citing_id,cited_id"]
    edge_lines += [f"{u},{v}" for u, v in sorted(graph.edges)]
    _atomic_write(out / EDGES_FILE, ("\n".join(edge_lines) + "\n").encode("utf-8"))

    dim = index.dim
    header = json.dumps({"dim": dim, "count": len(ids), "paper_ids": ids}, sort_keys=True)
    matrix = np.asarray([index.vectors[pid].values for pid in ids], dtype="<f4")
    _atomic_write(out / EMBEDDINGS_FILE, header.encode("utf-8") + b"\n" + matrix.tobytes())

    manifest = CorpusManifest(
        created_at=created_at,
        spec=spec,
        paper_count=len(ids),
        embedding_dim=dim,
        checksums={
            RECORDS_FILE: _sha256(out / RECORDS_FILE),
            EDGES_FILE: _sha256(out / EDGES_FILE),
            EMBEDDINGS_FILE: _sha256(out / EMBEDDINGS_FILE),
        },
    )
    _atomic_write(
        out / MANIFEST_FILE,
        (json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n").encode("utf-8"),
    )
    return manifest


def load_corpus(corpus_dir: str | Path) -> tuple[list[PaperRecord], CitationGraph, EmbeddingIndex, CorpusManifest]:
    corpus_dir = Path(corpus_dir)
    manifest_path = corpus_dir / MANIFEST_FILE
    if not manifest_path.exists():
        raise CorpusIoError(f"no manifest at {manifest_path}")
    manifest = CorpusManifest.from_dict(json.loads(manifest_path.read_text()))

    for name, expected in manifest.checksums.items():
        actual = _sha256(corpus_dir / name)
        if actual != expected:
            raise ConsistencyError(f"{name} checksum mismatch: manifest {expected}, file {actual}")

    records = []
    with open(corpus_dir / RECORDS_FILE, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                records.append(PaperRecord.from_dict(json.loads(line)))
    if len(records) != manifest.paper_count:
        raise ConsistencyError(
            f"manifest says {manifest.paper_count} papers, records file has {len(records)}"
        )

    raw = (corpus_dir / EMBEDDINGS_FILE).read_bytes()
    newline = raw.index(b"\n")
    header = json.loads(raw[:newline].decode("utf-8"))
    dim, count, paper_ids = header["dim"], header["count"], header["paper_ids"]
    if count != manifest.paper_count or dim != manifest.embedding_dim:
        raise ConsistencyError("embedding header disagrees with manifest")
    matrix = np.frombuffer(raw[newline + 1 :], dtype="<f4")
    if matrix.size != count * dim:
        raise ConsistencyError(f"embedding body has {matrix.size} floats, expected {count * dim}")
    matrix = matrix.reshape(count, dim)
    index = EmbeddingIndex()
    for row, pid in enumerate(paper_ids):
        index.add(pid, EmbeddingVector(tuple(float(x) for x in matrix[row])))

    edges = []
    with open(corpus_dir / EDGES_FILE, encoding="utf-8") as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    for ln in lines[1:]:  # skip header row
        citing, cited = ln.split(",", 1)
        edges.append((citing, cited))
    graph = CitationGraph.build(records, edges)

    if set(index.vectors) != set(graph.papers):
        raise ConsistencyError("embedding index and citation graph name different papers")
    return records, graph, index, manifest
