/** Thin client for the engine's HTTP + SSE contract. */

import type {
  EventDoc,
  GenerationHandleDoc,
  Mode,
  NodePosition,
  PapersResponse,
  RatingDoc,
  SessionDoc,
  ThoughtDoc,
} from "./model.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

async function expectJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { error?: string };
      if (body.error) detail = body.error;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(public base: string) {
    this.base = base.replace(/\/$/, "");
  }

  private async post<T>(path: string, body?: unknown): Promise<T> {
    return expectJson<T>(
      await fetch(this.base + path, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      }),
    );
  }

  private async put<T>(path: string, body: unknown): Promise<T> {
    return expectJson<T>(
      await fetch(this.base + path, {
        method: "PUT",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
  }

  createSession(topic: string, mode: Mode): Promise<{ session_id: string }> {
    return this.post("/sessions", { topic, mode });
  }

  async getSession(sessionId: string): Promise<SessionDoc> {
    return expectJson<SessionDoc>(await fetch(`${this.base}/sessions/${sessionId}`));
  }

  addInitialNode(sessionId: string, ideaText: string): Promise<{ node: { id: string } }> {
    return this.post(`/sessions/${sessionId}/nodes`, { idea_text: ideaText });
  }

  setFeedback(sessionId: string, nodeId: string, text: string): Promise<unknown> {
    return this.put(`/sessions/${sessionId}/nodes/${nodeId}/feedback`, { text });
  }

  setRating(sessionId: string, nodeId: string, rating: RatingDoc): Promise<unknown> {
    return this.put(`/sessions/${sessionId}/nodes/${nodeId}/rating`, rating);
  }

  generate(sessionId: string, nodeId: string): Promise<GenerationHandleDoc> {
    return this.post(`/sessions/${sessionId}/nodes/${nodeId}/generate`);
  }

  async getPapers(sessionId: string, nodeId: string): Promise<PapersResponse> {
    return expectJson<PapersResponse>(
      await fetch(`${this.base}/sessions/${sessionId}/nodes/${nodeId}/papers`),
    );
  }

  async getThought(sessionId: string, thoughtId: string): Promise<ThoughtDoc> {
    return expectJson<ThoughtDoc>(
      await fetch(`${this.base}/sessions/${sessionId}/thoughts/${thoughtId}`),
    );
  }

  putLayout(sessionId: string, layout: Record<string, NodePosition>): Promise<unknown> {
    return this.put(`/sessions/${sessionId}/layout`, layout);
  }

  /**
   * Subscribe to the session's SSE stream; events arrive in order.
   * Returns an unsubscribe function.
   */
  subscribe(sessionId: string, afterSeq: number, onEvent: (event: EventDoc) => void): () => void {
    const source = new EventSource(
      `${this.base}/sessions/${sessionId}/stream?after=${afterSeq}`,
    );
    const kinds = [
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
    ];
    for (const kind of kinds) {
      source.addEventListener(kind, (message) => {
        onEvent(JSON.parse((message as MessageEvent).data) as EventDoc);
      });
    }
    return () => source.close();
  }
}
