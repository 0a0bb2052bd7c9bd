"""Event-sourced session engine.

One engine owns one session.  Every mutation appends a typed event under
the session write lock, so the event log is the source of truth: the
flow reconstructed by ``replay_flows`` always equals the materialized
flow.  Generations run synchronously (CLI) or on a background thread
(server); either way commits serialize through the same lock, readers
never block on a running generation, and a second trigger on the same
source node is refused while one is active.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, replace
from typing import Any, Iterable

from . import agent, model
from .actions import UNPARSED
from .agent import GenerationResult, UnknownAction
from .ids import IdSource, SystemClock
from .llm import LlmError, Provider
from .model import (
    AgentThought,
    FlowError,
    Mode,
    Rating,
    RQFlow,
    Session,
    SessionEvent,
)
from .retrieval import Retriever

SNAPSHOT_EVERY = 20


class AlreadyGenerating(Exception):
    def __init__(self, node_id: str) -> None:
        super().__init__(f"a generation is already running on node {node_id}")
        self.node_id = node_id


@dataclass
class GenerationHandle:
    generation_id: str
    session_id: str
    source_node_id: str
    mode: Mode
    status: str = "Running"  # Running | Done | Failed

    def to_dict(self) -> dict[str, Any]:
        return {
            "generation_id": self.generation_id,
            "session_id": self.session_id,
            "source_node_id": self.source_node_id,
            "mode": self.mode.value,
            "status": self.status,
        }


def canonical_json(doc: dict) -> str:
    """The one serialization used for exports; byte-stable given equal docs."""
    return json.dumps(doc, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


class SessionEngine:
    def __init__(
        self,
        session: Session,
        llm: Provider,
        retriever: Retriever | None,
        *,
        ids: IdSource | None = None,
        clock=None,
        store=None,
    ) -> None:
        self.session = session
        self.llm = llm
        self.retriever = retriever
        self.ids = ids or IdSource()
        self.clock = clock or SystemClock()
        self.store = store
        self._lock = threading.RLock()
        self._new_event = threading.Condition(self._lock)
        self._active: dict[str, GenerationHandle] = {}
        self._threads: dict[str, threading.Thread] = {}

    @classmethod
    def create(
        cls,
        topic: str,
        mode: Mode,
        llm: Provider,
        retriever: Retriever | None,
        *,
        ids: IdSource | None = None,
        clock=None,
        store=None,
    ) -> "SessionEngine":
        ids = ids or IdSource()
        clock = clock or SystemClock()
        session = Session(ids.new_id(), topic, mode, clock.now())
        session.flows.append(RQFlow(ids.new_id()))
        engine = cls(session, llm, retriever, ids=ids, clock=clock, store=store)
        engine.append_event(
            "SessionCreated",
            {
                "session_id": session.id,
                "topic": topic,
                "mode": mode.value,
                "created_at": session.created_at,
                "flow_id": session.default_flow.id,
                "schema_version": model.SCHEMA_VERSION,
            },
        )
        return engine

    # -- events -----------------------------------------------------------

    def append_event(self, kind: str, payload: dict[str, Any]) -> SessionEvent:
        if kind not in model.EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind}")
        with self._lock:
            seq = self.session.event_log[-1].seq + 1 if self.session.event_log else 1
            event = SessionEvent(seq=seq, ts=self.clock.now(), kind=kind, payload=payload)
            self.session.event_log.append(event)
            if self.store is not None:
                self.store.append_event(self.session.id, event)
                if seq % SNAPSHOT_EVERY == 0:
                    self.store.save_snapshot(self.session)
            self._new_event.notify_all()
        return event

    def events_after(self, after_seq: int) -> list[SessionEvent]:
        with self._lock:
            return [e for e in self.session.event_log if e.seq > after_seq]

    def wait_events(self, after_seq: int, timeout: float) -> list[SessionEvent]:
        """Long-poll: block until events newer than ``after_seq`` exist."""
        with self._new_event:
            events = [e for e in self.session.event_log if e.seq > after_seq]
            if events or timeout <= 0:
                return events
            self._new_event.wait(timeout=timeout)
            return [e for e in self.session.event_log if e.seq > after_seq]

    # -- user mutations ----------------------------------------------------

    def add_initial_node(self, idea_text: str) -> str:
        with self._lock:
            flow = self.session.default_flow
            node_id = model.add_initial_node(flow, idea_text, ids=self.ids, clock=self.clock)
            self.append_event(
                "NodeAdded", {"flow_id": flow.id, "node": flow.nodes[node_id].to_dict()}
            )
        return node_id

    def set_feedback(self, node_id: str, feedback_text: str) -> model.RQNode:
        with self._lock:
            flow, _ = self.session.find_node(node_id)
            node = model.set_feedback(flow, node_id, feedback_text)
            self.append_event(
                "FeedbackSet",
                {"flow_id": flow.id, "node_id": node_id, "feedback": node.user_feedback},
            )
        return node

    def set_rating(self, node_id: str, rating: Rating) -> model.RQNode:
        with self._lock:
            flow, _ = self.session.find_node(node_id)
            node = model.set_rating(flow, node_id, rating)
            self.append_event(
                "RatingSet",
                {"flow_id": flow.id, "node_id": node_id, "rating": rating.to_dict()},
            )
        return node

    def set_layout(self, layout: dict[str, Any]) -> None:
        """Opaque UI layout positions; no event, snapshot-persisted only."""
        with self._lock:
            self.session.layout.update(layout)
            if self.store is not None:
                self.store.save_snapshot(self.session)

    # -- generation ---------------------------------------------------------

    def _begin_generation(self, node_id: str) -> GenerationHandle:
        with self._lock:
            self.session.find_node(node_id)  # raises UnknownNode
            if node_id in self._active:
                raise AlreadyGenerating(node_id)
            handle = GenerationHandle(
                generation_id=self.ids.new_id(),
                session_id=self.session.id,
                source_node_id=node_id,
                mode=self.session.mode,
            )
            self._active[node_id] = handle
            self.append_event(
                "GenerationStarted",
                {
                    "generation_id": handle.generation_id,
                    "source_node_id": node_id,
                    "mode": self.session.mode.value,
                },
            )
        return handle

    def _execute(self, handle: GenerationHandle) -> GenerationResult:
        node_id = handle.source_node_id

        def emit(kind: str, payload: dict) -> None:
            self.append_event(
                kind,
                {"generation_id": handle.generation_id, "source_node_id": node_id, **payload},
            )

        mode = self.session.mode
        flow, _ = self.session.find_node(node_id)
        try:
            if mode is Mode.BREADTH_FIRST:
                result = agent.generate_breadth(
                    self.session, flow, node_id, self.llm, self.retriever,
                    ids=self.ids, clock=self.clock, lock=self._lock, emit=emit,
                )
            else:
                result = agent.generate_depth(
                    self.session, flow, node_id, self.llm, self.retriever,
                    ids=self.ids, clock=self.clock, lock=self._lock, emit=emit,
                )
        except UnknownAction as exc:
            self._store_unparsed_thought(exc)
            result = GenerationResult(mode=mode, error=str(exc))
        except (agent.AgentError, LlmError, FlowError) as exc:
            result = GenerationResult(mode=mode, error=str(exc))
        finally:
            with self._lock:
                self._active.pop(node_id, None)

        committed = [nid for nid, _ in result.new_nodes]
        if result.error is not None:
            handle.status = "Failed"
            emit("GenerationFailed", {"error": result.error, "committed_node_ids": committed})
        else:
            handle.status = "Done"
            emit("GenerationFinished", {"node_ids": committed})
        if self.store is not None:
            with self._lock:
                self.store.save_snapshot(self.session)
        return result

    def run_generation(self, node_id: str) -> GenerationResult:
        """CLI path: run one full generation synchronously."""
        handle = self._begin_generation(node_id)
        return self._execute(handle)

    def start_generation(self, node_id: str) -> GenerationHandle:
        """Server path: trigger in the background and return immediately."""
        handle = self._begin_generation(node_id)
        thread = threading.Thread(target=self._execute, args=(handle,), daemon=True)
        self._threads[handle.generation_id] = thread
        thread.start()
        return handle

    def _store_unparsed_thought(self, exc: UnknownAction) -> None:
        """Keep the audit trail for replies that chose an unknown command."""
        response = exc.response
        thought = AgentThought(
            id=self.ids.new_id(),
            text=response.thoughts.text,
            reasoning=response.thoughts.reasoning,
            plan=response.thoughts.plan,
            criticism=response.thoughts.criticism,
            speak=response.thoughts.speak,
            command_name=UNPARSED,
            command_args=dict(response.command.args),
        )
        with self._lock:
            self.session.thoughts[thought.id] = thought

    def active_generation(self, node_id: str) -> GenerationHandle | None:
        with self._lock:
            return self._active.get(node_id)

    def wait_generations(self, timeout: float = 60.0) -> None:
        for thread in list(self._threads.values()):
            thread.join(timeout)

    # -- reads --------------------------------------------------------------

    def export_doc(self) -> dict[str, Any]:
        with self._lock:
            return self.session.to_dict()

    def export_json(self) -> str:
        return canonical_json(self.export_doc())


# -- event replay -----------------------------------------------------------


def replay_flows(events: Iterable[SessionEvent]) -> dict[str, RQFlow]:
    """Rebuild flows purely from the event log."""
    flows: dict[str, RQFlow] = {}

    def flow_for(payload: dict) -> RQFlow:
        fid = payload["flow_id"]
        if fid not in flows:
            flows[fid] = RQFlow(fid)
        return flows[fid]

    for event in events:
        payload = event.payload
        if event.kind == "SessionCreated":
            flows.setdefault(payload["flow_id"], RQFlow(payload["flow_id"]))
        elif event.kind == "NodeAdded":
            flow = flow_for(payload)
            node = model.RQNode.from_dict(payload["node"])
            flow.nodes[node.id] = node
        elif event.kind == "RQCommitted":
            flow = flow_for(payload)
            node = model.RQNode.from_dict(payload["node"])
            flow.nodes[node.id] = node
            flow.edges.append(model.FlowEdge.from_dict(payload["edge"]))
        elif event.kind == "FeedbackSet":
            flow = flow_for(payload)
            node = flow.node(payload["node_id"])
            flow.nodes[node.id] = replace(node, user_feedback=payload["feedback"])
        elif event.kind == "RatingSet":
            flow = flow_for(payload)
            node = flow.node(payload["node_id"])
            flow.nodes[node.id] = replace(node, rating=Rating.from_dict(payload["rating"]))
    return flows


def replay_session(events: list[SessionEvent]) -> Session:
    """Rebuild a full session (flows + thoughts) from its event log."""
    if not events or events[0].kind != "SessionCreated":
        raise ValueError("event log must begin with SessionCreated")
    head = events[0].payload
    if head.get("schema_version") != model.SCHEMA_VERSION:
        raise model.SchemaVersionUnsupported(str(head.get("schema_version")))
    session = Session(head["session_id"], head["topic"], Mode(head["mode"]), head["created_at"])
    flows = replay_flows(events)
    session.flows = [flows[head["flow_id"]]] + [
        f for fid, f in flows.items() if fid != head["flow_id"]
    ]
    for event in events:
        if event.kind == "RQCommitted":
            thought = AgentThought.from_dict(event.payload["thought"])
            session.thoughts[thought.id] = thought
    session.event_log = list(events)
    return session
