"""HTTP + SSE service over session engines.

Thin adapter: every route delegates to a ``SessionEngine`` and maps
domain errors onto status codes (404 unknown ids, 409 concurrent
generation on one node, 422 contract violations, 502 provider failures).
Generation triggers return immediately with a handle; progress flows
through the event endpoints, so no GET ever blocks on a running
generation.  The long-poll route and the SSE stream read the same event
log and therefore deliver identical sequences.
"""

from __future__ import annotations

import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Any, Iterator

from fastapi import Body, FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse

from . import model
from .engine import AlreadyGenerating, SessionEngine
from .ids import IdSource, SystemClock
from .llm import LlmError, Provider
from .model import (
    EmptyIdea,
    FlowError,
    InitialNodeNotRatable,
    Mode,
    OutOfRange,
    Rating,
    SchemaVersionUnsupported,
    UnknownNode,
)
from .retrieval import RetrievalError, Retriever, UnknownPaper, citation_subgraph, neighbor_highlight
from .store import SessionStore, StoreError

log = logging.getLogger("rqflow.server")

LONG_POLL_TIMEOUT_S = 25.0
SSE_KEEPALIVE_S = 15.0


class ApiError(Exception):
    def __init__(self, status: int, message: str) -> None:
        super().__init__(message)
        self.status = status
        self.message = message


def _not_found(what: str) -> ApiError:
    return ApiError(404, what)


class SessionRegistry:
    """Engines by session id, lazily restored from the store."""

    def __init__(
        self,
        llm: Provider,
        retriever: Retriever | None,
        store: SessionStore | None = None,
        ids: IdSource | None = None,
        clock=None,
    ) -> None:
        self.llm = llm
        self.retriever = retriever
        self.store = store
        self.ids = ids or IdSource()
        self.clock = clock or SystemClock()
        self.engines: dict[str, SessionEngine] = {}

    def create(self, topic: str, mode: Mode) -> SessionEngine:
        engine = SessionEngine.create(
            topic, mode, self.llm, self.retriever,
            ids=self.ids, clock=self.clock, store=self.store,
        )
        self.engines[engine.session.id] = engine
        return engine

    def get(self, session_id: str) -> SessionEngine:
        if session_id in self.engines:
            return self.engines[session_id]
        if self.store is not None:
            try:
                session = self.store.load(session_id)
            except (StoreError, SchemaVersionUnsupported):
                raise _not_found(f"unknown session {session_id}") from None
            engine = SessionEngine(
                session, self.llm, self.retriever,
                ids=self.ids, clock=self.clock, store=self.store,
            )
            self.engines[session_id] = engine
            return engine
        raise _not_found(f"unknown session {session_id}")


def create_app(registry: SessionRegistry, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="rqflow", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    @app.exception_handler(ApiError)
    async def api_error_handler(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"error": exc.message})

    @app.middleware("http")
    async def request_logger(request: Request, call_next):
        start = time.monotonic()
        response = await call_next(request)
        log.info(
            json.dumps(
                {
                    "method": request.method,
                    "path": request.url.path,
                    "status": response.status_code,
                    "ms": round((time.monotonic() - start) * 1000, 1),
                }
            )
        )
        return response

    def run_protected(fn, *args, **kwargs):
        """Map domain errors onto transport codes."""
        try:
            return fn(*args, **kwargs)
        except AlreadyGenerating as exc:
            raise ApiError(409, str(exc)) from exc
        except (EmptyIdea, OutOfRange, InitialNodeNotRatable) as exc:
            raise ApiError(422, f"{type(exc).__name__}: {exc}") from exc
        except (UnknownNode, UnknownPaper) as exc:
            raise _not_found(str(exc)) from exc
        except LlmError as exc:
            raise ApiError(502, f"provider failure: {exc}") from exc
        except (FlowError, RetrievalError) as exc:
            raise ApiError(422, str(exc)) from exc

    @app.post("/sessions", status_code=201)
    def create_session(payload: dict = Body(...)):
        topic = payload.get("topic", "")
        if not isinstance(topic, str) or not topic.strip():
            raise ApiError(422, "topic must be a non-empty string")
        try:
            mode = Mode(payload.get("mode", ""))
        except ValueError:
            raise ApiError(422, f"mode must be one of {[m.value for m in Mode]}") from None
        engine = registry.create(topic, mode)
        return {"session_id": engine.session.id, "mode": mode.value, "topic": topic}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return registry.get(session_id).export_doc()

    @app.post("/sessions/{session_id}/nodes", status_code=201)
    def add_node(session_id: str, payload: dict = Body(...)):
        engine = registry.get(session_id)
        node_id = run_protected(engine.add_initial_node, str(payload.get("idea_text", "")))
        flow, node = engine.session.find_node(node_id)
        return {"node": node.to_dict(), "flow_id": flow.id}

    @app.put("/sessions/{session_id}/nodes/{node_id}/feedback")
    def put_feedback(session_id: str, node_id: str, payload: dict = Body(...)):
        engine = registry.get(session_id)
        node = run_protected(engine.set_feedback, node_id, str(payload.get("text", "")))
        return {"node": node.to_dict()}

    @app.put("/sessions/{session_id}/nodes/{node_id}/rating")
    def put_rating(session_id: str, node_id: str, payload: dict = Body(...)):
        engine = registry.get(session_id)

        def apply() -> model.RQNode:
            try:
                rating = Rating.from_dict(payload)
            except KeyError as exc:
                raise OutOfRange(f"missing rating dimension {exc}") from exc
            return engine.set_rating(node_id, rating)

        node = run_protected(apply)
        return {"node": node.to_dict()}

    @app.post("/sessions/{session_id}/nodes/{node_id}/generate", status_code=202)
    def generate(session_id: str, node_id: str):
        engine = registry.get(session_id)
        handle = run_protected(engine.start_generation, node_id)
        return handle.to_dict()

    @app.get("/sessions/{session_id}/events")
    def get_events(session_id: str, after: int = 0, wait: float = 0.0):
        engine = registry.get(session_id)
        timeout = min(max(wait, 0.0), LONG_POLL_TIMEOUT_S)
        events = engine.wait_events(after, timeout) if timeout else engine.events_after(after)
        return {"events": [e.to_dict() for e in events]}

    @app.get("/sessions/{session_id}/stream")
    def stream_events(session_id: str, after: int = 0, limit: int | None = None):
        engine = registry.get(session_id)

        def event_stream() -> Iterator[str]:
            cursor = after
            sent = 0
            while True:
                events = engine.wait_events(cursor, timeout=SSE_KEEPALIVE_S)
                if not events:
                    yield ": keepalive\n\n"
                    continue
                for event in events:
                    cursor = event.seq
                    sent += 1
                    payload = json.dumps(event.to_dict(), ensure_ascii=False)
                    yield f"event: {event.kind}\nid: {event.seq}\ndata: {payload}\n\n"
                    if limit is not None and sent >= limit:
                        return

        return StreamingResponse(
            event_stream(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    @app.get("/sessions/{session_id}/nodes/{node_id}/papers")
    def node_papers(session_id: str, node_id: str):
        engine = registry.get(session_id)
        if registry.retriever is None:
            raise ApiError(422, "no corpus loaded")
        _, node = run_protected(engine.session.find_node, node_id)

        def retrieve():
            records = registry.retriever.retrieve(node.text)
            ids = [r.paper_id for r in records]
            sub = citation_subgraph(registry.retriever.graph, ids)
            neighbors = {}
            for pid in ids:
                cited_by, cites = neighbor_highlight(sub, pid)
                neighbors[pid] = {"cited_by": sorted(cited_by), "cites": sorted(cites)}
            return records, sub, neighbors

        records, sub, neighbors = run_protected(retrieve)
        return {
            "query": node.text,
            "papers": [r.to_dict() for r in records],
            "subgraph": {
                "papers": sorted(sub.papers),
                "edges": sorted([list(e) for e in sub.edges]),
            },
            "neighbors": neighbors,
        }

    @app.get("/sessions/{session_id}/thoughts/{thought_id}")
    def get_thought(session_id: str, thought_id: str):
        engine = registry.get(session_id)
        thought = engine.session.thoughts.get(thought_id)
        if thought is None:
            raise _not_found(f"unknown thought {thought_id}")
        return thought.to_dict()

    @app.get("/sessions/{session_id}/export")
    def export_session(session_id: str):
        engine = registry.get(session_id)
        return Response(content=engine.export_json(), media_type="application/json")

    @app.put("/sessions/{session_id}/layout")
    def put_layout(session_id: str, payload: dict = Body(...)):
        engine = registry.get(session_id)
        engine.set_layout(payload)
        return {"layout": engine.session.layout}

    return app


def load_server_config(path: str | None = None, env: dict[str, str] | None = None) -> dict[str, Any]:
    """Config file with environment overrides (RQFLOW_BIND, RQFLOW_CORPUS_DIR,
    RQFLOW_STORE_DIR, RQFLOW_ENDPOINT, RQFLOW_CHAT_MODEL, RQFLOW_EMBED_MODEL)."""
    env = env if env is not None else dict(os.environ)
    config: dict[str, Any] = {
        "bind": "127.0.0.1:8040",
        "corpus_dir": None,
        "store_dir": "./sessions",
        "provider": {},
        "retrieval": {},
    }
    if path:
        config.update(json.loads(Path(path).read_text(encoding="utf-8")))
    if "RQFLOW_BIND" in env:
        config["bind"] = env["RQFLOW_BIND"]
    if "RQFLOW_CORPUS_DIR" in env:
        config["corpus_dir"] = env["RQFLOW_CORPUS_DIR"]
    if "RQFLOW_STORE_DIR" in env:
        config["store_dir"] = env["RQFLOW_STORE_DIR"]
    for key, name in [
        ("endpoint", "RQFLOW_ENDPOINT"),
        ("chat_model", "RQFLOW_CHAT_MODEL"),
        ("embed_model", "RQFLOW_EMBED_MODEL"),
    ]:
        if name in env:
            config.setdefault("provider", {})[key] = env[name]
    return config


def configure_stderr_logging() -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(name)s %(message)s"))
    root = logging.getLogger("rqflow")
    root.addHandler(handler)
    root.setLevel(logging.INFO)
