/** Wire types mirroring the engine's session schema (schema_version 1). */

export type Mode = "BreadthFirst" | "DepthFirst";
export type NodeKind = "Initial" | "Generated";

export interface RatingDoc {
  novelty: number;
  value: number;
  surprise: number;
  relevance: number;
}

export interface NodeDoc {
  id: string;
  text: string;
  kind: NodeKind;
  depth: number;
  created_at: number;
  user_feedback: string | null;
  rating: RatingDoc | null;
}

export interface EdgeDoc {
  source: string;
  target: string;
  annotation: string;
  thought_id: string;
}

export interface FlowDoc {
  id: string;
  nodes: NodeDoc[];
  edges: EdgeDoc[];
}

export interface ThoughtDoc {
  id: string;
  text: string;
  reasoning: string;
  plan: string;
  criticism: string;
  speak: string;
  command_name: string;
  command_args: Record<string, string>;
  action_result: string;
  discarded_rqs: string[];
}

export interface EventDoc {
  seq: number;
  ts: number;
  kind: string;
  // payload shape varies by kind; see projection.ts for the kinds we read
  payload: Record<string, unknown>;
}

export interface SessionDoc {
  schema_version: number;
  id: string;
  topic: string;
  mode: Mode;
  created_at: number;
  flows: FlowDoc[];
  thoughts: Record<string, ThoughtDoc>;
  events: EventDoc[];
  layout: Record<string, NodePosition>;
}

export interface NodePosition {
  x: number;
  y: number;
}

export interface PaperDoc {
  paper_id: string;
  title: string;
  abstract: string;
  authors: string[];
  tldr: string | null;
  url: string | null;
  year: number | null;
  venue: string | null;
}

export interface PapersResponse {
  query: string;
  papers: PaperDoc[];
  subgraph: { papers: string[]; edges: [string, string][] };
  neighbors: Record<string, { cited_by: string[]; cites: string[] }>;
}

export interface GenerationHandleDoc {
  generation_id: string;
  session_id: string;
  source_node_id: string;
  mode: Mode;
  status: "Running" | "Done" | "Failed";
}
