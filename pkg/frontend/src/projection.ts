/**
 * Pure projection of (session snapshot + event stream) into view state.
 *
 * The canvas renders exclusively from this state, so replaying the same
 * events always yields the same rendered node/edge set.  Events are
 * applied idempotently by sequence number; the snapshot's embedded
 * event list seeds per-edge iteration numbers (which drive dashed
 * styling for autonomous depth iterations).
 */

import type {
  EdgeDoc,
  EventDoc,
  Mode,
  NodeDoc,
  NodePosition,
  RatingDoc,
  SessionDoc,
  ThoughtDoc,
} from "./model.js";

export interface ViewState {
  sessionId: string;
  topic: string;
  mode: Mode;
  flowId: string;
  nodes: Map<string, NodeDoc>;
  edges: EdgeDoc[];
  /** edgeKey -> generation iteration (1..3); depth iterations >= 2 render dashed */
  edgeIteration: Map<string, number>;
  thoughts: Map<string, ThoughtDoc>;
  layout: Map<string, NodePosition>;
  /** source node id -> generation id, for in-flight generations */
  running: Map<string, string>;
  lastSeq: number;
  selectedNodeId: string | null;
  selectedEdgeKey: string | null;
  selectedPaperId: string | null;
}

export function edgeKey(edge: Pick<EdgeDoc, "source" | "target">): string {
  return `${edge.source}->${edge.target}`;
}

export function initialViewState(doc: SessionDoc): ViewState {
  const flow = doc.flows[0];
  const state: ViewState = {
    sessionId: doc.id,
    topic: doc.topic,
    mode: doc.mode,
    flowId: flow.id,
    nodes: new Map(flow.nodes.map((n) => [n.id, n])),
    edges: [...flow.edges],
    edgeIteration: new Map(),
    thoughts: new Map(Object.entries(doc.thoughts)),
    layout: new Map(Object.entries(doc.layout ?? {})),
    running: new Map(),
    lastSeq: 0,
    selectedNodeId: null,
    selectedEdgeKey: null,
    selectedPaperId: null,
  };
  // Snapshot edges carry no iteration; recover it from the embedded log.
  for (const event of doc.events) {
    if (event.kind === "RQCommitted") {
      const edge = event.payload.edge as EdgeDoc;
      state.edgeIteration.set(edgeKey(edge), (event.payload.iteration as number) ?? 1);
    }
    state.lastSeq = Math.max(state.lastSeq, event.seq);
  }
  return state;
}

/** Apply one live event in place; returns true when state changed. */
export function applyEvent(state: ViewState, event: EventDoc): boolean {
  if (event.seq <= state.lastSeq) {
    return false; // already reflected (snapshot overlap or SSE replay)
  }
  state.lastSeq = event.seq;
  const payload = event.payload;
  switch (event.kind) {
    case "NodeAdded": {
      const node = payload.node as NodeDoc;
      state.nodes.set(node.id, node);
      return true;
    }
    case "RQCommitted": {
      const node = payload.node as NodeDoc;
      const edge = payload.edge as EdgeDoc;
      const thought = payload.thought as ThoughtDoc;
      state.nodes.set(node.id, node);
      if (!state.edges.some((e) => edgeKey(e) === edgeKey(edge))) {
        state.edges.push(edge);
      }
      state.edgeIteration.set(edgeKey(edge), (payload.iteration as number) ?? 1);
      state.thoughts.set(thought.id, thought);
      return true;
    }
    case "FeedbackSet": {
      const node = state.nodes.get(payload.node_id as string);
      if (node) {
        state.nodes.set(node.id, { ...node, user_feedback: payload.feedback as string | null });
      }
      return true;
    }
    case "RatingSet": {
      const node = state.nodes.get(payload.node_id as string);
      if (node) {
        state.nodes.set(node.id, { ...node, rating: payload.rating as RatingDoc });
      }
      return true;
    }
    case "GenerationStarted": {
      state.running.set(payload.source_node_id as string, payload.generation_id as string);
      return true;
    }
    case "GenerationFinished":
    case "GenerationFailed": {
      state.running.delete(payload.source_node_id as string);
      return true;
    }
    default:
      return false; // ActionChosen / ActionResult change no canvas state
  }
}

/** Depth iterations beyond the first are autonomous: rendered dashed. */
export function isDashedEdge(state: ViewState, edge: EdgeDoc): boolean {
  if (state.mode !== "DepthFirst") {
    return false;
  }
  return (state.edgeIteration.get(edgeKey(edge)) ?? 1) >= 2;
}

export function childrenOf(state: ViewState, nodeId: string): NodeDoc[] {
  return state.edges
    .filter((e) => e.source === nodeId)
    .map((e) => state.nodes.get(e.target))
    .filter((n): n is NodeDoc => n !== undefined);
}
