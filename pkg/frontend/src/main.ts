/**
 * Bootstrap: wires the three panels to one session over HTTP + SSE.
 *
 * All semantic mutations round-trip through the server and come back as
 * events; the canvas re-renders only from projected state, so what you
 * see is exactly what the event log says.  Only layout drags are
 * optimistic.
 */

import { ApiClient, ApiError } from "./api.js";
import { FlowView } from "./flowView.js";
import type { Mode, PapersResponse } from "./model.js";
import { PaperGraphView } from "./paperGraphView.js";
import { applyEvent, edgeKey, initialViewState, type ViewState } from "./projection.js";
import { ThoughtsView } from "./thoughtsView.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

class App {
  private api: ApiClient;
  private state: ViewState | null = null;
  private papers: PapersResponse | null = null;
  private flowView!: FlowView;
  private paperView!: PaperGraphView;
  private thoughtsView!: ThoughtsView;
  private notices!: HTMLDivElement;
  private unsubscribe: (() => void) | null = null;

  constructor(private root: HTMLElement) {
    this.api = new ApiClient(this.defaultApiBase());
    this.buildChrome();
  }

  private defaultApiBase(): string {
    const override = new URLSearchParams(window.location.search).get("api");
    return override ?? window.location.origin;
  }

  private buildChrome(): void {
    const topbar = el("header", "topbar");
    const apiInput = el("input") as HTMLInputElement;
    apiInput.value = this.api.base;
    apiInput.className = "api-base";
    topbar.appendChild(apiInput);

    const topicInput = el("input") as HTMLInputElement;
    topicInput.placeholder = "research topic / initial idea";
    topicInput.className = "topic";
    topbar.appendChild(topicInput);

    const modeSelect = el("select") as HTMLSelectElement;
    for (const mode of ["BreadthFirst", "DepthFirst"]) {
      const option = el("option", undefined, mode) as HTMLOptionElement;
      option.value = mode;
      modeSelect.appendChild(option);
    }
    topbar.appendChild(modeSelect);

    const createButton = el("button", undefined, "start session");
    createButton.addEventListener("click", () => {
      this.api = new ApiClient(apiInput.value);
      void this.startSession(topicInput.value, modeSelect.value as Mode);
    });
    topbar.appendChild(createButton);

    const loadInput = el("input") as HTMLInputElement;
    loadInput.placeholder = "existing session id";
    topbar.appendChild(loadInput);
    const loadButton = el("button", undefined, "load");
    loadButton.addEventListener("click", () => {
      this.api = new ApiClient(apiInput.value);
      void this.loadSession(loadInput.value.trim());
    });
    topbar.appendChild(loadButton);

    this.notices = el("div", "notices");
    topbar.appendChild(this.notices);
    this.root.appendChild(topbar);

    const panels = el("main", "panels");
    const flowPanel = el("section", "panel flow-panel");
    flowPanel.appendChild(el("h2", undefined, "RQ Flow"));
    const flowHost = el("div", "panel-body");
    flowPanel.appendChild(flowHost);
    panels.appendChild(flowPanel);

    const paperPanel = el("section", "panel paper-panel");
    paperPanel.appendChild(el("h2", undefined, "Paper Graph"));
    const paperHost = el("div", "panel-body");
    paperPanel.appendChild(paperHost);
    panels.appendChild(paperPanel);

    const thoughtsPanel = el("section", "panel thoughts-panel");
    thoughtsPanel.appendChild(el("h2", undefined, "AI Thoughts"));
    const thoughtsHost = el("div", "panel-body");
    thoughtsPanel.appendChild(thoughtsHost);
    panels.appendChild(thoughtsPanel);
    this.root.appendChild(panels);

    this.flowView = new FlowView(flowHost, {
      onSelectNode: (nodeId) => this.selectNode(nodeId),
      onSelectEdge: (key) => void this.selectEdge(key),
      onGenerate: (nodeId) => void this.generate(nodeId),
      onFeedback: (nodeId, text) => void this.guard(this.api.setFeedback(this.sessionId(), nodeId, text)),
      onRate: (nodeId, rating) => void this.guard(this.api.setRating(this.sessionId(), nodeId, rating)),
      onLayoutChange: (nodeId, position) => {
        this.state?.layout.set(nodeId, position);
        void this.guard(this.api.putLayout(this.sessionId(), { [nodeId]: position }));
      },
    });
    this.paperView = new PaperGraphView(paperHost, {
      onSelectPaper: (paperId) => {
        if (this.state) {
          this.state.selectedPaperId = paperId;
          this.paperView.render(this.papers, paperId);
        }
      },
    });
    this.thoughtsView = new ThoughtsView(thoughtsHost);
  }

  private sessionId(): string {
    if (!this.state) throw new Error("no session loaded");
    return this.state.sessionId;
  }

  private notice(message: string): void {
    const note = el("div", "notice", message);
    const dismiss = el("button", "dismiss", "×");
    dismiss.addEventListener("click", () => note.remove());
    note.appendChild(dismiss);
    this.notices.appendChild(note);
  }

  private async guard<T>(work: Promise<T>): Promise<T | null> {
    try {
      return await work;
    } catch (error) {
      if (error instanceof ApiError && this.state) {
        // stale selections and the like: resync from the server
        this.notice(`${error.status}: ${error.message}`);
        await this.resync();
        return null;
      }
      this.notice(String(error));
      return null;
    }
  }

  private async startSession(topic: string, mode: Mode): Promise<void> {
    if (!topic.trim()) {
      this.notice("enter a topic first");
      return;
    }
    const created = await this.guard(this.api.createSession(topic, mode));
    if (!created) return;
    await this.loadSession(created.session_id);
    const added = await this.guard(this.api.addInitialNode(created.session_id, topic));
    if (added && this.state) {
      this.state.selectedNodeId = added.node.id;
    }
  }

  private async loadSession(sessionId: string): Promise<void> {
    if (!sessionId) return;
    const doc = await this.guard(this.api.getSession(sessionId));
    if (!doc) return;
    this.unsubscribe?.();
    this.state = initialViewState(doc);
    this.papers = null;
    this.flowView.render(this.state);
    this.paperView.render(null);
    this.thoughtsView.renderIdle();
    this.unsubscribe = this.api.subscribe(sessionId, this.state.lastSeq, (event) => {
      if (this.state && applyEvent(this.state, event)) {
        this.flowView.render(this.state);
      }
    });
  }

  private async resync(): Promise<void> {
    if (this.state) {
      await this.loadSession(this.state.sessionId);
    }
  }

  private selectNode(nodeId: string | null): void {
    if (!this.state) return;
    this.state.selectedNodeId = nodeId;
    this.state.selectedEdgeKey = null;
    this.flowView.render(this.state);
    if (nodeId) {
      void this.showPapers(nodeId);
    }
  }

  private async showPapers(nodeId: string): Promise<void> {
    this.papers = await this.guard(this.api.getPapers(this.sessionId(), nodeId));
    this.paperView.render(this.papers, null);
  }

  private async selectEdge(key: string | null): Promise<void> {
    if (!this.state) return;
    this.state.selectedEdgeKey = key;
    this.state.selectedNodeId = null;
    this.flowView.render(this.state);
    if (!key) {
      this.thoughtsView.renderIdle();
      return;
    }
    const edge = this.state.edges.find((candidate) => edgeKey(candidate) === key);
    if (!edge) return;
    const cached = this.state.thoughts.get(edge.thought_id);
    const thought = cached ?? (await this.guard(this.api.getThought(this.sessionId(), edge.thought_id)));
    if (thought) {
      this.state.thoughts.set(thought.id, thought);
      this.thoughtsView.render(edge.annotation, thought);
    } else {
      this.thoughtsView.renderMissing(edge.thought_id);
    }
  }

  private async generate(nodeId: string): Promise<void> {
    await this.guard(this.api.generate(this.sessionId(), nodeId));
    // progress arrives through the SSE subscription; nothing to block on
  }
}

const root = document.getElementById("app");
if (root) {
  new App(root);
}

export { App };
