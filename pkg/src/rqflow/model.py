"""Domain model for research-question flows and sessions.

An RQ flow is a DAG of question nodes joined by annotated provenance
edges.  Nodes, edges, ratings, and thoughts are immutable values; the
flow and session are the mutable containers that the owning engine
updates under its write lock.  Every mutation here preserves the flow
invariants (acyclicity, single parent per generated node, depth
recurrence), and ``validate_flow`` re-checks them diagnostically for
data that arrived through deserialization.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable

from .actions import ACTION_NAMES, UNPARSED
from .ids import IdSource

SCHEMA_VERSION = 1

RATING_DIMENSIONS = ("novelty", "value", "surprise", "relevance")


class FlowError(Exception):
    """Base for flow/session contract violations."""


class EmptyIdea(FlowError):
    pass


class UnknownNode(FlowError):
    pass


class UnknownParent(FlowError):
    pass


class MalformedAnnotation(FlowError):
    pass


class OutOfRange(FlowError):
    pass


class InitialNodeNotRatable(FlowError):
    pass


class LeafOnlyDeletion(FlowError):
    """Raised when deleting an interior node; cascade semantics are undefined."""


class NodeKind(str, Enum):
    INITIAL = "Initial"
    GENERATED = "Generated"


class Mode(str, Enum):
    BREADTH_FIRST = "BreadthFirst"
    DEPTH_FIRST = "DepthFirst"

    @property
    def annotation_prefix(self) -> str:
        return "Breadth" if self is Mode.BREADTH_FIRST else "Depth"


@dataclass(frozen=True)
class Rating:
    """Per-question scores on four dimensions, each an integer 1..5.

    Construction validates all four together, so a partially populated
    rating is unrepresentable.
    """

    novelty: int
    value: int
    surprise: int
    relevance: int

    def __post_init__(self) -> None:
        for dim in RATING_DIMENSIONS:
            v = getattr(self, dim)
            if not isinstance(v, int) or isinstance(v, bool) or not 1 <= v <= 5:
                raise OutOfRange(f"{dim} must be an integer in [1,5], got {v!r}")

    def to_dict(self) -> dict[str, int]:
        return {dim: getattr(self, dim) for dim in RATING_DIMENSIONS}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Rating":
        return cls(**{dim: d[dim] for dim in RATING_DIMENSIONS})


@dataclass(frozen=True)
class RQNode:
    id: str
    text: str
    kind: NodeKind
    depth: int
    created_at: float
    user_feedback: str | None = None
    rating: Rating | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "text": self.text,
            "kind": self.kind.value,
            "depth": self.depth,
            "created_at": self.created_at,
            "user_feedback": self.user_feedback,
            "rating": self.rating.to_dict() if self.rating else None,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RQNode":
        return cls(
            id=d["id"],
            text=d["text"],
            kind=NodeKind(d["kind"]),
            depth=d["depth"],
            created_at=d["created_at"],
            user_feedback=d.get("user_feedback"),
            rating=Rating.from_dict(d["rating"]) if d.get("rating") else None,
        )


@dataclass(frozen=True)
class FlowEdge:
    """Provenance edge ``source -> target`` labeled "<Mode>: <action_name>"."""

    source: str
    target: str
    annotation: str
    thought_id: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "source": self.source,
            "target": self.target,
            "annotation": self.annotation,
            "thought_id": self.thought_id,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "FlowEdge":
        return cls(d["source"], d["target"], d["annotation"], d["thought_id"])


@dataclass(frozen=True)
class AgentThought:
    """One Think-Act-Observe record attached to generation edges.

    ``discarded_rqs`` keeps the alternate questions a depth iteration did
    not commit, so the audit trail covers the full response.
    """

    id: str
    text: str
    reasoning: str
    plan: str
    criticism: str
    speak: str
    command_name: str
    command_args: dict[str, str] = field(default_factory=dict)
    action_result: str = ""
    discarded_rqs: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.command_name not in ACTION_NAMES and self.command_name != UNPARSED:
            raise FlowError(f"unknown command_name {self.command_name!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "text": self.text,
            "reasoning": self.reasoning,
            "plan": self.plan,
            "criticism": self.criticism,
            "speak": self.speak,
            "command_name": self.command_name,
            "command_args": dict(self.command_args),
            "action_result": self.action_result,
            "discarded_rqs": list(self.discarded_rqs),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AgentThought":
        return cls(
            id=d["id"],
            text=d["text"],
            reasoning=d["reasoning"],
            plan=d["plan"],
            criticism=d["criticism"],
            speak=d["speak"],
            command_name=d["command_name"],
            command_args=dict(d.get("command_args", {})),
            action_result=d.get("action_result", ""),
            discarded_rqs=tuple(d.get("discarded_rqs", ())),
        )


class RQFlow:
    """Mutable container of nodes and edges forming one DAG forest."""

    def __init__(self, flow_id: str) -> None:
        self.id = flow_id
        self.nodes: dict[str, RQNode] = {}
        self.edges: list[FlowEdge] = []

    def node(self, node_id: str) -> RQNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def incoming(self, node_id: str) -> list[FlowEdge]:
        return [e for e in self.edges if e.target == node_id]

    def outgoing(self, node_id: str) -> list[FlowEdge]:
        return [e for e in self.edges if e.source == node_id]

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "nodes": [n.to_dict() for n in self.nodes.values()],
            "edges": [e.to_dict() for e in self.edges],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RQFlow":
        flow = cls(d["id"])
        for nd in d["nodes"]:
            node = RQNode.from_dict(nd)
            flow.nodes[node.id] = node
        flow.edges = [FlowEdge.from_dict(ed) for ed in d["edges"]]
        return flow


@dataclass
class SessionEvent:
    """Append-only log record; ``seq`` is strictly increasing per session."""

    seq: int
    ts: float
    kind: str
    payload: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"seq": self.seq, "ts": self.ts, "kind": self.kind, "payload": self.payload}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SessionEvent":
        return cls(seq=d["seq"], ts=d["ts"], kind=d["kind"], payload=d["payload"])


EVENT_KINDS = (
    "SessionCreated",
    "NodeAdded",
    "FeedbackSet",
    "RatingSet",
    "GenerationStarted",
    "ActionChosen",
    "ActionResult",
    "RQCommitted",
    "GenerationFinished",
    "GenerationFailed",
)


class Session:
    """The persisted unit of work: topic, mode, flows, thoughts, event log."""

    def __init__(self, session_id: str, topic: str, mode: Mode, created_at: float) -> None:
        self.id = session_id
        self.topic = topic
        self.mode = mode
        self.created_at = created_at
        self.flows: list[RQFlow] = []
        self.thoughts: dict[str, AgentThought] = {}
        self.event_log: list[SessionEvent] = []
        # Opaque UI layout side map (node id -> arbitrary JSON); the engine
        # never interprets it.
        self.layout: dict[str, Any] = {}

    @property
    def default_flow(self) -> RQFlow:
        return self.flows[0]

    def find_node(self, node_id: str) -> tuple[RQFlow, RQNode]:
        for flow in self.flows:
            if node_id in flow.nodes:
                return flow, flow.nodes[node_id]
        raise UnknownNode(node_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "topic": self.topic,
            "mode": self.mode.value,
            "created_at": self.created_at,
            "flows": [f.to_dict() for f in self.flows],
            "thoughts": {tid: t.to_dict() for tid, t in self.thoughts.items()},
            "events": [e.to_dict() for e in self.event_log],
            "layout": self.layout,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Session":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaVersionUnsupported(f"schema_version {version!r} not supported")
        session = cls(d["id"], d["topic"], Mode(d["mode"]), d["created_at"])
        session.flows = [RQFlow.from_dict(fd) for fd in d["flows"]]
        session.thoughts = {tid: AgentThought.from_dict(td) for tid, td in d["thoughts"].items()}
        session.event_log = [SessionEvent.from_dict(ed) for ed in d["events"]]
        session.layout = dict(d.get("layout", {}))
        return session


class SchemaVersionUnsupported(FlowError):
    pass


def parse_annotation(annotation: str) -> tuple[str, str]:
    """Split "<Mode>: <action_name>" into its parts, validating both."""
    if ": " not in annotation:
        raise MalformedAnnotation(annotation)
    prefix, action = annotation.split(": ", 1)
    if prefix not in ("Breadth", "Depth"):
        raise MalformedAnnotation(f"unknown mode prefix in {annotation!r}")
    if action not in ACTION_NAMES:
        raise MalformedAnnotation(f"unknown action in {annotation!r}")
    return prefix, action


def add_initial_node(flow: RQFlow, idea_text: str, *, ids: IdSource, clock) -> str:
    """Create an initial (depth 0) node holding the user's rough idea."""
    if not idea_text.strip():
        raise EmptyIdea("initial idea text is blank")
    node = RQNode(
        id=ids.new_id(),
        text=idea_text,
        kind=NodeKind.INITIAL,
        depth=0,
        created_at=clock.now(),
    )
    flow.nodes[node.id] = node
    return node.id


def attach_generated_node(
    flow: RQFlow,
    parent_id: str,
    rq_text: str,
    annotation: str,
    thought_id: str,
    *,
    ids: IdSource,
    clock,
) -> str:
    """Attach one generated node under ``parent_id`` with an annotated edge.

    The new node has depth ``parent.depth + 1`` and exactly one incoming
    edge; since it has no outgoing edges, acyclicity is preserved by
    construction.
    """
    if parent_id not in flow.nodes:
        raise UnknownParent(parent_id)
    if not rq_text.strip():
        raise ValueError("generated RQ text must be non-empty")
    parse_annotation(annotation)
    parent = flow.nodes[parent_id]
    node = RQNode(
        id=ids.new_id(),
        text=rq_text,
        kind=NodeKind.GENERATED,
        depth=parent.depth + 1,
        created_at=clock.now(),
    )
    flow.nodes[node.id] = node
    flow.edges.append(FlowEdge(source=parent_id, target=node.id, annotation=annotation, thought_id=thought_id))
    return node.id


def set_feedback(flow: RQFlow, node_id: str, feedback_text: str) -> RQNode:
    """Store user feedback verbatim; an empty string clears it."""
    node = flow.node(node_id)
    updated = replace(node, user_feedback=feedback_text if feedback_text else None)
    flow.nodes[node_id] = updated
    return updated


def set_rating(flow: RQFlow, node_id: str, rating: Rating) -> RQNode:
    """Rate a generated node; re-rating overwrites."""
    node = flow.node(node_id)
    if node.kind is NodeKind.INITIAL:
        raise InitialNodeNotRatable(node_id)
    updated = replace(node, rating=rating)
    flow.nodes[node_id] = updated
    return updated


def node_depth(flow: RQFlow, node_id: str) -> int:
    return flow.node(node_id).depth


def delete_leaf_node(flow: RQFlow, node_id: str) -> None:
    """Remove a leaf node and its incoming edge.

    Interior deletion is rejected: what should happen to descendants is
    an open design question, so we refuse rather than guess.
    """
    flow.node(node_id)
    if flow.outgoing(node_id):
        raise LeafOnlyDeletion(f"node {node_id} has outgoing edges")
    flow.edges = [e for e in flow.edges if e.target != node_id]
    del flow.nodes[node_id]


def _find_cycle_nodes(flow: RQFlow) -> set[str]:
    """Nodes on at least one directed cycle (iterative three-color DFS)."""
    adjacency: dict[str, list[str]] = {nid: [] for nid in flow.nodes}
    for e in flow.edges:
        if e.source in adjacency and e.target in flow.nodes:
            adjacency[e.source].append(e.target)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {nid: WHITE for nid in flow.nodes}
    cyclic: set[str] = set()
    for root in flow.nodes:
        if color[root] != WHITE:
            continue
        stack: list[tuple[str, int]] = [(root, 0)]
        path: list[str] = []
        color[root] = GRAY
        path.append(root)
        while stack:
            nid, i = stack[-1]
            if i < len(adjacency[nid]):
                stack[-1] = (nid, i + 1)
                child = adjacency[nid][i]
                if color[child] == GRAY:
                    # back edge: everything from child to top of path cycles
                    idx = path.index(child)
                    cyclic.update(path[idx:])
                elif color[child] == WHITE:
                    color[child] = GRAY
                    path.append(child)
                    stack.append((child, 0))
            else:
                stack.pop()
                path.pop()
                color[nid] = BLACK
    return cyclic


def validate_flow(flow: RQFlow) -> list[str]:
    """Return one message per violated invariant; empty list means valid.

    Diagnostic only: intended for data that bypassed the mutation API,
    e.g. a hand-edited or corrupted session document.
    """
    violations: list[str] = []
    for node in flow.nodes.values():
        if node.kind is NodeKind.INITIAL and node.depth != 0:
            violations.append(f"initial node {node.id} has depth {node.depth}")
        if node.kind is NodeKind.GENERATED and node.depth == 0:
            violations.append(f"generated node {node.id} has depth 0")
        if node.kind is NodeKind.GENERATED and not node.text.strip():
            violations.append(f"generated node {node.id} has empty text")
        if node.depth < 0:
            violations.append(f"node {node.id} has negative depth")
    for e in flow.edges:
        if e.source == e.target:
            violations.append(f"self-edge on {e.source}")
        if e.source not in flow.nodes:
            violations.append(f"edge source {e.source} not in flow")
        if e.target not in flow.nodes:
            violations.append(f"edge target {e.target} not in flow")
        try:
            parse_annotation(e.annotation)
        except MalformedAnnotation:
            violations.append(f"malformed annotation {e.annotation!r} on {e.source}->{e.target}")
    indegree: dict[str, int] = {nid: 0 for nid in flow.nodes}
    for e in flow.edges:
        if e.target in indegree and e.source != e.target:
            indegree[e.target] += 1
    for node in flow.nodes.values():
        if node.kind is NodeKind.INITIAL and indegree[node.id] != 0:
            violations.append(f"initial node {node.id} has incoming edges")
        if node.kind is NodeKind.GENERATED and indegree[node.id] != 1:
            violations.append(
                f"generated node {node.id} has in-degree {indegree[node.id]}, expected 1"
            )
    cyclic = _find_cycle_nodes(flow)
    if cyclic:
        violations.append("cycle through nodes {%s}" % ", ".join(sorted(cyclic)))
    else:
        # depth recurrence is only meaningful on acyclic data
        for e in flow.edges:
            if e.source in flow.nodes and e.target in flow.nodes:
                parent, child = flow.nodes[e.source], flow.nodes[e.target]
                if child.kind is NodeKind.GENERATED and child.depth != parent.depth + 1:
                    violations.append(
                        f"depth of {child.id} is {child.depth}, expected {parent.depth + 1}"
                    )
    return violations


def validate_session(session: Session) -> list[str]:
    """Session-level invariants on top of per-flow validation."""
    violations: list[str] = []
    for flow in session.flows:
        violations.extend(validate_flow(flow))
        for e in flow.edges:
            if e.thought_id not in session.thoughts:
                violations.append(f"edge {e.source}->{e.target} references unknown thought {e.thought_id}")
    seqs = [ev.seq for ev in session.event_log]
    if any(b <= a for a, b in zip(seqs, seqs[1:])):
        violations.append("event seq numbers are not strictly increasing")
    return violations


def flows_equal(a: RQFlow, b: RQFlow) -> bool:
    """Structural equality: same nodes (all fields) and same edge multiset."""
    return (
        a.id == b.id
        and a.nodes == b.nodes
        and sorted(a.edges, key=lambda e: (e.source, e.target)) == sorted(b.edges, key=lambda e: (e.source, e.target))
    )


def iter_path_to_root(flow: RQFlow, node_id: str) -> Iterable[RQNode]:
    """Nodes from the initial ancestor down to ``node_id`` (inclusive)."""
    chain: list[RQNode] = []
    current: str | None = node_id
    seen: set[str] = set()
    while current is not None:
        if current in seen:  # cycle guard for corrupted data
            break
        seen.add(current)
        node = flow.node(current)
        chain.append(node)
        parents = flow.incoming(current)
        current = parents[0].source if parents else None
    return reversed(chain)
