"""Literature retrieval: embedding index, similarity, MMR, citation graph.

The corpus is small (~2k papers) so everything is an exact scan, no ANN
structure.  All ranking is deterministic: every tie anywhere breaks by
ascending paper id, which makes results independent of input order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from .llm import EmbeddingVector

DEFAULT_K = 10
DEFAULT_CANDIDATE_POOL = 50
DEFAULT_LAMBDA = 0.7

# Papers embed as title + this separator + abstract; the provider-derived
# tldr is deliberately excluded as unstable.
EMBED_SEPARATOR = ". "


class RetrievalError(Exception):
    pass


class DimMismatch(RetrievalError):
    pass


class ZeroVector(RetrievalError):
    pass


class EmptyIndex(RetrievalError):
    pass


class KExceedsCandidates(RetrievalError):
    pass


class UnknownPaper(RetrievalError):
    pass


@dataclass(frozen=True)
class PaperRecord:
    paper_id: str
    title: str
    abstract: str = ""
    authors: tuple[str, ...] = ()
    tldr: str | None = None
    url: str | None = None
    year: int | None = None
    venue: str | None = None

    def __post_init__(self) -> None:
        if not self.title:
            raise ValueError(f"paper {self.paper_id!r} has empty title")

    def embedding_text(self) -> str:
        return self.title + EMBED_SEPARATOR + self.abstract

    def to_dict(self) -> dict[str, Any]:
        return {
            "paper_id": self.paper_id,
            "title": self.title,
            "abstract": self.abstract,
            "authors": list(self.authors),
            "tldr": self.tldr,
            "url": self.url,
            "year": self.year,
            "venue": self.venue,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PaperRecord":
        return cls(
            paper_id=d["paper_id"],
            title=d["title"],
            abstract=d.get("abstract", ""),
            authors=tuple(d.get("authors", ())),
            tldr=d.get("tldr"),
            url=d.get("url"),
            year=d.get("year"),
            venue=d.get("venue"),
        )


class CitationGraph:
    """Directed graph of papers; an edge (a, b) means "a cites b".

    Mutual citations are legal (preprints cite each other); only RQ flows
    are DAGs.  Self-citation edges and dangling endpoints are not.
    """

    def __init__(self) -> None:
        self.papers: dict[str, PaperRecord] = {}
        self.edges: set[tuple[str, str]] = set()

    def add_paper(self, record: PaperRecord) -> None:
        self.papers[record.paper_id] = record

    def add_edge(self, citing_id: str, cited_id: str) -> None:
        if citing_id == cited_id:
            raise ValueError(f"self-citation edge on {citing_id}")
        if citing_id not in self.papers:
            raise UnknownPaper(citing_id)
        if cited_id not in self.papers:
            raise UnknownPaper(cited_id)
        self.edges.add((citing_id, cited_id))

    @classmethod
    def build(cls, records: Iterable[PaperRecord], edges: Iterable[tuple[str, str]]) -> "CitationGraph":
        graph = cls()
        for r in records:
            graph.add_paper(r)
        for citing, cited in edges:
            graph.add_edge(citing, cited)
        return graph


@dataclass
class EmbeddingIndex:
    """paper_id -> dense vector, all sharing one dimensionality."""

    vectors: dict[str, EmbeddingVector] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        if not self.vectors:
            raise EmptyIndex("index holds no vectors")
        return next(iter(self.vectors.values())).dim

    def add(self, paper_id: str, vector: EmbeddingVector) -> None:
        if self.vectors and vector.dim != self.dim:
            raise DimMismatch(f"vector for {paper_id} has dim {vector.dim}, index dim {self.dim}")
        self.vectors[paper_id] = vector


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = DEFAULT_K
    candidate_pool: int = DEFAULT_CANDIDATE_POOL
    lambda_param: float = DEFAULT_LAMBDA

    def __post_init__(self) -> None:
        if not 1 <= self.k <= self.candidate_pool:
            raise ValueError(f"need 1 <= k <= candidate_pool, got k={self.k}, pool={self.candidate_pool}")
        if not 0.0 <= self.lambda_param <= 1.0:
            raise ValueError(f"lambda must be in [0,1], got {self.lambda_param}")


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dim != b.dim:
        raise DimMismatch(f"dims differ: {a.dim} vs {b.dim}")
    dot = sum(x * y for x, y in zip(a.values, b.values))
    norm_a = math.sqrt(sum(x * x for x in a.values))
    norm_b = math.sqrt(sum(y * y for y in b.values))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine undefined for all-zero vector")
    return dot / (norm_a * norm_b)


def candidate_shortlist(
    query_vec: EmbeddingVector, index: EmbeddingIndex, pool_size: int
) -> list[tuple[str, float]]:
    """Top ``pool_size`` papers by cosine similarity, descending.

    Ties break by ascending paper id so the order is total.
    """
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    if not index.vectors:
        raise EmptyIndex("cannot shortlist from an empty index")
    scored = [(pid, cosine_similarity(query_vec, vec)) for pid, vec in index.vectors.items()]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:pool_size]


def mmr_rerank(
    query_vec: EmbeddingVector,
    candidates: Sequence[tuple[str, EmbeddingVector]],
    lambda_param: float,
    k: int,
) -> list[str]:
    """Greedy maximal-marginal-relevance selection of k candidate ids.

    Each step picks the unselected candidate maximizing
    ``lambda * sim(d, query) - (1 - lambda) * max_{s in selected} sim(d, s)``
    with the redundancy term defined as 0 while nothing is selected.
    """
    if not 0.0 <= lambda_param <= 1.0:
        raise ValueError(f"lambda must be in [0,1], got {lambda_param}")
    if k > len(candidates):
        raise KExceedsCandidates(f"k={k} but only {len(candidates)} candidates")
    relevance = {pid: cosine_similarity(vec, query_vec) for pid, vec in candidates}
    vectors = dict(candidates)
    remaining = sorted(vectors)  # ascending id; sort order is the tie rule
    selected: list[str] = []
    pair_sim: dict[tuple[str, str], float] = {}

    def sim_to(pid: str, sid: str) -> float:
        key = (pid, sid) if pid < sid else (sid, pid)
        if key not in pair_sim:
            pair_sim[key] = cosine_similarity(vectors[pid], vectors[sid])
        return pair_sim[key]

    for _ in range(k):
        best_pid: str | None = None
        best_score = -math.inf
        for pid in remaining:
            redundancy = max((sim_to(pid, sid) for sid in selected), default=0.0)
            score = lambda_param * relevance[pid] - (1.0 - lambda_param) * redundancy
            if score > best_score:  # ascending scan makes ties keep the lower id
                best_pid, best_score = pid, score
        assert best_pid is not None
        selected.append(best_pid)
        remaining.remove(best_pid)
    return selected


def retrieve_papers(
    query_text: str,
    index: EmbeddingIndex,
    graph: CitationGraph,
    config: RetrievalConfig,
    embed_fn: Callable[[list[str]], list[EmbeddingVector]],
) -> list[PaperRecord]:
    """Embed the query, shortlist, MMR-rerank, resolve to records.

    ``k`` and the candidate pool clamp to the corpus size on this
    user-facing path instead of erroring.
    """
    if not query_text.strip():
        raise ValueError("query text must be non-empty")
    if not index.vectors:
        raise EmptyIndex("corpus index is empty")
    query_vec = embed_fn([query_text])[0]
    pool_size = min(config.candidate_pool, len(index.vectors))
    shortlist = candidate_shortlist(query_vec, index, pool_size)
    candidates = [(pid, index.vectors[pid]) for pid, _ in shortlist]
    k = min(config.k, len(candidates))
    chosen = mmr_rerank(query_vec, candidates, config.lambda_param, k)
    missing = [pid for pid in chosen if pid not in graph.papers]
    if missing:
        raise UnknownPaper(missing[0])
    return [graph.papers[pid] for pid in chosen]


def citation_subgraph(graph: CitationGraph, paper_ids: Iterable[str]) -> CitationGraph:
    """Induced subgraph: the given papers plus every edge between them."""
    ids = set(paper_ids)
    for pid in sorted(ids):
        if pid not in graph.papers:
            raise UnknownPaper(pid)
    sub = CitationGraph()
    for pid in ids:
        sub.add_paper(graph.papers[pid])
    sub.edges = {(u, v) for (u, v) in graph.edges if u in ids and v in ids}
    return sub


def neighbor_highlight(graph: CitationGraph, paper_id: str) -> tuple[set[str], set[str]]:
    """(cited_by, cites) for one paper: in-neighbors and out-neighbors."""
    if paper_id not in graph.papers:
        raise UnknownPaper(paper_id)
    cited_by = {u for (u, v) in graph.edges if v == paper_id}
    cites = {v for (u, v) in graph.edges if u == paper_id}
    return cited_by, cites


@dataclass
class Retriever:
    """Bundles a loaded corpus with its embedder for the agent and server."""

    index: EmbeddingIndex
    graph: CitationGraph
    config: RetrievalConfig
    embed_fn: Callable[[list[str]], list[EmbeddingVector]]

    def retrieve(self, query_text: str) -> list[PaperRecord]:
        return retrieve_papers(query_text, self.index, self.graph, self.config, self.embed_fn)
