"""Corpus construction: fetch metadata, build citation graph, embed, persist.

The scholarly API sits behind a small protocol with two
implementations: ``FixtureApi`` replays canned response bodies from disk
(how all tests run) and ``HttpScholarlyApi`` talks to a real endpoint,
rate-limited, with the API key taken from the environment.  Records
without abstracts are dropped: we embed title+abstract uniformly and
refuse to silently embed titles alone.
"""

from __future__ import annotations

import json
import logging
import random
import time
from pathlib import Path
from typing import Callable, Protocol, Sequence

import requests

from .corpus_store import CorpusManifest, CorpusSpec, persist_corpus
from .llm import EmbeddingVector
from .retrieval import CitationGraph, EmbeddingIndex, PaperRecord

log = logging.getLogger(__name__)

PAGE_SIZE = 100
EMBED_BATCH_SIZE = 64
FETCH_RETRIES = 4


class IngestionError(Exception):
    pass


class ApiRejected(IngestionError):
    """Non-retryable API refusal (bad key, bad query)."""


class RateLimited(IngestionError):
    """Throttled or transiently failing; retried with backoff."""


class EmbeddingFailed(IngestionError):
    def __init__(self, paper_id: str, cause: Exception) -> None:
        super().__init__(f"embedding failed at paper {paper_id}: {cause}")
        self.paper_id = paper_id


class ScholarlyApi(Protocol):
    def search_venue(self, venue: str, offset: int, limit: int, fields: Sequence[str]) -> tuple[int, list[dict]]:
        """Returns (total result count, page of raw paper dicts)."""

    def references(self, paper_id: str) -> list[str]:
        """Paper ids cited by the given paper."""


class FixtureApi:
    """Replays canned response bodies: search_<venue>_<offset>.json and
    references_<paper_id>.json under one directory."""

    def __init__(self, fixture_dir: str | Path) -> None:
        self.dir = Path(fixture_dir)
        if not self.dir.is_dir():
            raise IngestionError(f"fixture directory {self.dir} does not exist")

    def _load(self, name: str) -> dict:
        path = self.dir / name
        if not path.exists():
            raise ApiRejected(f"no fixture body {name}")
        return json.loads(path.read_text(encoding="utf-8"))

    def search_venue(self, venue: str, offset: int, limit: int, fields: Sequence[str]) -> tuple[int, list[dict]]:
        body = self._load(f"search_{venue}_{offset}.json")
        return body["total"], body["data"][:limit]

    def references(self, paper_id: str) -> list[str]:
        body = self._load(f"references_{paper_id}.json")
        out = []
        for row in body.get("data", []):
            cited = (row.get("citedPaper") or {}).get("paperId")
            if cited:
                out.append(cited)
        return out


class HttpScholarlyApi:
    """Live client: paced to ``rate_limit`` requests/second with jitter."""

    def __init__(
        self,
        base_url: str = "https://api.semanticscholar.org/graph/v1",
        api_key_env: str = "SCHOLARLY_API_KEY",
        rate_limit: float = 1.0,
        session: requests.Session | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.min_interval = 1.0 / max(rate_limit, 1e-6)
        self._http = session or requests.Session()
        self._last_request = 0.0

    def _pace(self) -> None:
        import os

        wait = self._last_request + self.min_interval - time.monotonic()
        if wait > 0:
            time.sleep(wait + random.uniform(0, 0.1 * self.min_interval))
        self._last_request = time.monotonic()
        self._headers = {}
        key = os.environ.get(self.api_key_env, "")
        if key:
            self._headers["x-api-key"] = key

    def _get(self, path: str, params: dict) -> dict:
        self._pace()
        try:
            resp = self._http.get(self.base_url + path, params=params, headers=self._headers, timeout=30)
        except requests.RequestException as exc:
            raise RateLimited(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise RateLimited(f"status {resp.status_code}")
        if resp.status_code >= 400:
            raise ApiRejected(f"status {resp.status_code}: {resp.text[:200]}")
        return resp.json()

    def search_venue(self, venue: str, offset: int, limit: int, fields: Sequence[str]) -> tuple[int, list[dict]]:
        body = self._get(
            "/paper/search",
            {"query": "*", "venue": venue, "offset": offset, "limit": limit, "fields": ",".join(fields)},
        )
        return body.get("total", 0), body.get("data", [])

    def references(self, paper_id: str) -> list[str]:
        body = self._get(f"/paper/{paper_id}/references", {"fields": "paperId", "limit": 1000})
        return [
            row["citedPaper"]["paperId"]
            for row in body.get("data", [])
            if row.get("citedPaper") and row["citedPaper"].get("paperId")
        ]


def _with_fetch_retries(fn: Callable[[], object], sleep: Callable[[float], None] = time.sleep):
    for attempt in range(FETCH_RETRIES + 1):
        try:
            return fn()
        except RateLimited:
            if attempt == FETCH_RETRIES:
                raise
            sleep(min(8.0, 0.5 * 2**attempt) * random.uniform(0.5, 1.0))
    raise AssertionError("unreachable")


def _parse_record(raw: dict) -> PaperRecord | None:
    paper_id = raw.get("paperId") or raw.get("paper_id")
    title = (raw.get("title") or "").strip()
    if not paper_id or not title:
        return None
    tldr = raw.get("tldr")
    if isinstance(tldr, dict):
        tldr = tldr.get("text")
    authors = tuple(
        a["name"] for a in raw.get("authors", []) if isinstance(a, dict) and a.get("name")
    )
    return PaperRecord(
        paper_id=paper_id,
        title=title,
        abstract=(raw.get("abstract") or "").strip(),
        authors=authors,
        tldr=tldr,
        url=raw.get("url"),
        year=raw.get("year"),
        venue=raw.get("venue"),
    )


def fetch_papers(spec: CorpusSpec, api: ScholarlyApi, sleep: Callable[[float], None] = time.sleep) -> list[PaperRecord]:
    """Paginated fetch over the venue list: deduplicated, abstract-bearing,
    capped at ``spec.max_papers``."""
    kept: dict[str, PaperRecord] = {}
    dropped_no_abstract = 0
    for venue in spec.venues:
        offset = 0
        while len(kept) < spec.max_papers:
            total, page = _with_fetch_retries(
                lambda: api.search_venue(venue, offset, PAGE_SIZE, spec.fields_requested), sleep
            )
            for raw in page:
                record = _parse_record(raw)
                if record is None:
                    continue
                if not record.abstract:
                    dropped_no_abstract += 1
                    log.info("dropping %s (no abstract): %s", record.paper_id, record.title)
                    continue
                if record.paper_id not in kept:
                    kept[record.paper_id] = record
                if len(kept) >= spec.max_papers:
                    break
            offset += PAGE_SIZE
            if offset >= total or not page:
                break
    if dropped_no_abstract:
        log.info("excluded %d records without abstracts", dropped_no_abstract)
    return list(kept.values())


def build_citation_graph(records: Sequence[PaperRecord], api: ScholarlyApi,
                         sleep: Callable[[float], None] = time.sleep) -> CitationGraph:
    """Edges citing -> cited, restricted to pairs inside the corpus."""
    graph = CitationGraph()
    for r in records:
        graph.add_paper(r)
    corpus_ids = set(graph.papers)
    for r in records:
        refs = _with_fetch_retries(lambda: api.references(r.paper_id), sleep)
        for cited in refs:
            if cited in corpus_ids and cited != r.paper_id:
                graph.add_edge(r.paper_id, cited)
    return graph


def build_index(
    records: Sequence[PaperRecord],
    embed_fn: Callable[[list[str]], list[EmbeddingVector]],
    batch_size: int = EMBED_BATCH_SIZE,
) -> EmbeddingIndex:
    """One vector per paper from the title+abstract composition, batched."""
    index = EmbeddingIndex()
    for start in range(0, len(records), batch_size):
        batch = records[start : start + batch_size]
        try:
            vectors = embed_fn([r.embedding_text() for r in batch])
        except Exception as exc:
            raise EmbeddingFailed(batch[0].paper_id, exc) from exc
        for record, vector in zip(batch, vectors):
            index.add(record.paper_id, vector)
    return index


def build_corpus(
    spec: CorpusSpec,
    api: ScholarlyApi,
    embed_fn: Callable[[list[str]], list[EmbeddingVector]],
    out_dir: str | Path,
    created_at: float = 0.0,
) -> CorpusManifest:
    """fetch -> graph -> index -> persist, returning the manifest."""
    records = fetch_papers(spec, api)
    graph = build_citation_graph(records, api)
    index = build_index(records, embed_fn)
    return persist_corpus(records, graph, index, out_dir, spec, created_at=created_at)
