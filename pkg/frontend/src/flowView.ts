/**
 * RQ Flow Editor: an SVG mind-map of question nodes and annotated edges.
 *
 * Clicking a node expands it in place (feedback box plus four 1-5 rating
 * sliders); right-click triggers generation on that node; dragging moves
 * a node and persists to the layout side map.  Edge labels stay visible
 * at every zoom level, truncated harder as the canvas zooms out.  In
 * depth mode the second and third iteration edges render dashed: those
 * hops were autonomous, not user-triggered.
 *
 * Rendering is a pure function of the projected view state; the only
 * interaction refused is re-triggering a node that is already
 * generating (mirrors the server's 409).
 */

import type { NodeDoc, NodePosition, RatingDoc } from "./model.js";
import { edgeKey, isDashedEdge, type ViewState } from "./projection.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const XHTML_NS = "http://www.w3.org/1999/xhtml";

const NODE_W = 200;
const NODE_H = 64;
const COL_GAP = 280;
const ROW_GAP = 120;
const EXPANDED_H = 240;

export interface FlowViewCallbacks {
  onSelectNode(nodeId: string | null): void;
  onSelectEdge(key: string | null): void;
  onGenerate(nodeId: string): void;
  onFeedback(nodeId: string, text: string): void;
  onRate(nodeId: string, rating: RatingDoc): void;
  onLayoutChange(nodeId: string, position: NodePosition): void;
}

interface DragState {
  nodeId: string;
  pointerStart: { x: number; y: number };
  nodeStart: NodePosition;
  moved: boolean;
}

export class FlowView {
  private svg: SVGSVGElement;
  private viewport: SVGGElement;
  private zoom = 1;
  private drag: DragState | null = null;
  private positions = new Map<string, NodePosition>();
  private state: ViewState | null = null;

  constructor(container: HTMLElement, private callbacks: FlowViewCallbacks) {
    this.svg = document.createElementNS(SVG_NS, "svg");
    this.svg.setAttribute("class", "flow-canvas");
    this.svg.setAttribute("width", "100%");
    this.svg.setAttribute("height", "100%");
    this.viewport = document.createElementNS(SVG_NS, "g");
    this.svg.appendChild(this.viewport);
    container.appendChild(this.svg);

    this.svg.addEventListener("wheel", (event) => {
      event.preventDefault();
      const factor = event.deltaY < 0 ? 1.1 : 1 / 1.1;
      this.zoom = Math.min(3, Math.max(0.3, this.zoom * factor));
      if (this.state) this.render(this.state);
    });
    this.svg.addEventListener("mousemove", (event) => this.onMouseMove(event));
    this.svg.addEventListener("mouseup", () => this.onMouseUp());
    this.svg.addEventListener("mousedown", (event) => {
      if (event.target === this.svg) {
        this.callbacks.onSelectNode(null);
        this.callbacks.onSelectEdge(null);
      }
    });
  }

  /** Where a node sits: explicit layout beats the computed layered grid. */
  private computePositions(state: ViewState): void {
    this.positions.clear();
    const perDepth = new Map<number, number>();
    for (const node of state.nodes.values()) {
      const explicit = state.layout.get(node.id);
      if (explicit) {
        this.positions.set(node.id, explicit);
        continue;
      }
      const row = perDepth.get(node.depth) ?? 0;
      perDepth.set(node.depth, row + 1);
      this.positions.set(node.id, {
        x: 40 + node.depth * COL_GAP,
        y: 40 + row * ROW_GAP,
      });
    }
  }

  private truncate(text: string, base: number): string {
    // zoom-dependent: zoomed out leaves less room per label
    const limit = Math.max(8, Math.round(base * this.zoom));
    return text.length <= limit ? text : text.slice(0, limit - 1) + "…";
  }

  render(state: ViewState): void {
    this.state = state;
    this.computePositions(state);
    this.viewport.replaceChildren();
    this.viewport.setAttribute("transform", `scale(${this.zoom})`);
    for (const edge of state.edges) {
      this.viewport.appendChild(this.renderEdge(state, edge));
    }
    for (const node of state.nodes.values()) {
      this.viewport.appendChild(this.renderNode(state, node));
    }
  }

  private renderEdge(state: ViewState, edge: { source: string; target: string; annotation: string }): SVGGElement {
    const group = document.createElementNS(SVG_NS, "g");
    const key = edgeKey(edge);
    const dashed = isDashedEdge(state, edge as never);
    group.setAttribute("class", `flow-edge${dashed ? " dashed" : ""}${state.selectedEdgeKey === key ? " selected" : ""}`);
    group.setAttribute("data-edge-key", key);

    const from = this.positions.get(edge.source);
    const to = this.positions.get(edge.target);
    if (!from || !to) return group;

    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(from.x + NODE_W));
    line.setAttribute("y1", String(from.y + NODE_H / 2));
    line.setAttribute("x2", String(to.x));
    line.setAttribute("y2", String(to.y + NODE_H / 2));
    line.setAttribute("stroke", "#5b6472");
    line.setAttribute("stroke-width", "1.6");
    line.setAttribute("marker-end", "url(#arrow)");
    if (dashed) {
      line.setAttribute("stroke-dasharray", "6 4");
    }
    group.appendChild(line);

    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("class", "edge-label");
    label.setAttribute("x", String((from.x + NODE_W + to.x) / 2));
    label.setAttribute("y", String((from.y + to.y) / 2 + NODE_H / 2 - 6));
    label.setAttribute("text-anchor", "middle");
    label.textContent = this.truncate(edge.annotation, 38);
    label.setAttribute("data-full-annotation", edge.annotation);
    group.appendChild(label);

    group.addEventListener("click", (event) => {
      event.stopPropagation();
      this.callbacks.onSelectEdge(key);
    });
    return group;
  }

  private renderNode(state: ViewState, node: NodeDoc): SVGGElement {
    const position = this.positions.get(node.id) as NodePosition;
    const expanded = state.selectedNodeId === node.id;
    const running = state.running.has(node.id);

    const group = document.createElementNS(SVG_NS, "g");
    group.setAttribute(
      "class",
      [
        "rq-node",
        node.kind === "Initial" ? "initial" : "generated",
        expanded ? "expanded" : "",
        running ? "generating" : "",
      ].filter(Boolean).join(" "),
    );
    group.setAttribute("data-node-id", node.id);
    group.setAttribute("data-depth", String(node.depth));
    group.setAttribute("transform", `translate(${position.x}, ${position.y})`);

    const rect = document.createElementNS(SVG_NS, "rect");
    rect.setAttribute("width", String(NODE_W));
    rect.setAttribute("height", String(expanded ? EXPANDED_H : NODE_H));
    rect.setAttribute("rx", "8");
    group.appendChild(rect);

    const text = document.createElementNS(SVG_NS, "text");
    text.setAttribute("class", "node-text");
    text.setAttribute("x", "10");
    text.setAttribute("y", "22");
    text.textContent = this.truncate(node.text, 30);
    group.appendChild(text);

    const meta = document.createElementNS(SVG_NS, "text");
    meta.setAttribute("class", "node-meta");
    meta.setAttribute("x", "10");
    meta.setAttribute("y", String(NODE_H - 10));
    const badge = node.rating
      ? ` ★(${node.rating.novelty},${node.rating.value},${node.rating.surprise},${node.rating.relevance})`
      : "";
    meta.textContent = `d=${node.depth}${running ? " ⋯generating" : ""}${badge}`;
    group.appendChild(meta);

    if (expanded) {
      group.appendChild(this.renderExpansion(node));
    }

    group.addEventListener("mousedown", (event) => {
      const target = event.target as Element;
      if (target.closest("foreignObject")) return; // let form controls work
      event.stopPropagation();
      this.drag = {
        nodeId: node.id,
        pointerStart: { x: event.clientX, y: event.clientY },
        nodeStart: { ...position },
        moved: false,
      };
    });
    group.addEventListener("click", (event) => {
      const target = event.target as Element;
      if (target.closest("foreignObject")) return;
      event.stopPropagation();
      if (!this.drag || !this.drag.moved) {
        this.callbacks.onSelectNode(node.id);
      }
    });
    group.addEventListener("contextmenu", (event) => {
      event.preventDefault();
      event.stopPropagation();
      if (!running) {
        // the one refused interaction: re-triggering a generating node
        this.callbacks.onGenerate(node.id);
      }
    });
    return group;
  }

  private renderExpansion(node: NodeDoc): SVGForeignObjectElement {
    const holder = document.createElementNS(SVG_NS, "foreignObject");
    holder.setAttribute("x", "0");
    holder.setAttribute("y", String(NODE_H));
    holder.setAttribute("width", String(NODE_W));
    holder.setAttribute("height", String(EXPANDED_H - NODE_H));

    const panel = document.createElementNS(XHTML_NS, "div") as HTMLDivElement;
    panel.className = "node-expansion";

    const feedback = document.createElementNS(XHTML_NS, "textarea") as HTMLTextAreaElement;
    feedback.value = node.user_feedback ?? "";
    feedback.placeholder = "feedback to the agent";
    feedback.setAttribute("data-role", "feedback-input");
    panel.appendChild(feedback);

    const saveFeedback = document.createElementNS(XHTML_NS, "button") as HTMLButtonElement;
    saveFeedback.textContent = "Save feedback";
    saveFeedback.setAttribute("data-role", "save-feedback");
    saveFeedback.addEventListener("click", () => this.callbacks.onFeedback(node.id, feedback.value));
    panel.appendChild(saveFeedback);

    const sliders: Partial<Record<keyof RatingDoc, HTMLInputElement>> = {};
    for (const dimension of ["novelty", "value", "surprise", "relevance"] as const) {
      const row = document.createElementNS(XHTML_NS, "label") as HTMLLabelElement;
      row.className = "rating-row";
      row.textContent = dimension;
      const slider = document.createElementNS(XHTML_NS, "input") as HTMLInputElement;
      slider.type = "range";
      slider.min = "1";
      slider.max = "5";
      slider.step = "1";
      slider.name = dimension;
      slider.value = String(node.rating?.[dimension] ?? 3);
      sliders[dimension] = slider;
      row.appendChild(slider);
      panel.appendChild(row);
    }

    const saveRating = document.createElementNS(XHTML_NS, "button") as HTMLButtonElement;
    saveRating.textContent = "Save rating";
    saveRating.setAttribute("data-role", "save-rating");
    if (node.kind === "Initial") {
      saveRating.disabled = true; // initial ideas are not ratable
      saveRating.title = "initial ideas are not rated";
    }
    saveRating.addEventListener("click", () => {
      this.callbacks.onRate(node.id, {
        novelty: Number(sliders.novelty!.value),
        value: Number(sliders.value!.value),
        surprise: Number(sliders.surprise!.value),
        relevance: Number(sliders.relevance!.value),
      });
    });
    panel.appendChild(saveRating);

    const hint = document.createElementNS(XHTML_NS, "div") as HTMLDivElement;
    hint.className = "hint";
    hint.textContent = "right-click the node to generate follow-up RQs";
    panel.appendChild(hint);

    holder.appendChild(panel);
    return holder;
  }

  private onMouseMove(event: MouseEvent): void {
    if (!this.drag || !this.state) return;
    const dx = (event.clientX - this.drag.pointerStart.x) / this.zoom;
    const dy = (event.clientY - this.drag.pointerStart.y) / this.zoom;
    if (Math.abs(dx) + Math.abs(dy) < 3) return;
    this.drag.moved = true;
    const position = {
      x: this.drag.nodeStart.x + dx,
      y: this.drag.nodeStart.y + dy,
    };
    this.positions.set(this.drag.nodeId, position);
    const group = this.viewport.querySelector(`[data-node-id="${this.drag.nodeId}"]`);
    group?.setAttribute("transform", `translate(${position.x}, ${position.y})`);
  }

  private onMouseUp(): void {
    if (this.drag?.moved) {
      const position = this.positions.get(this.drag.nodeId)!;
      // optimistic locally; persisted to the session's layout side map
      this.callbacks.onLayoutChange(this.drag.nodeId, position);
    }
    this.drag = null;
  }
}
