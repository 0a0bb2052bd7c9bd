/**
 * Paper Graph Visualizer: the citation subgraph for the selected RQ.
 *
 * Papers sit on a circle with directed citation edges between them.
 * Hovering shows a title tooltip; clicking highlights the paper and its
 * in/out citation neighbors and fills the detail card (title, authors,
 * abstract, TLDR, outbound link).
 */

import type { PaperDoc, PapersResponse } from "./model.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface PaperGraphCallbacks {
  onSelectPaper(paperId: string | null): void;
}

export class PaperGraphView {
  private svg: SVGSVGElement;
  private tooltip: HTMLDivElement;
  private details: HTMLDivElement;
  private empty: HTMLDivElement;
  private data: PapersResponse | null = null;

  constructor(
    container: HTMLElement,
    private callbacks: PaperGraphCallbacks,
  ) {
    this.svg = document.createElementNS(SVG_NS, "svg");
    this.svg.setAttribute("class", "paper-canvas");
    this.svg.setAttribute("viewBox", "0 0 420 320");
    container.appendChild(this.svg);

    this.tooltip = document.createElement("div");
    this.tooltip.className = "paper-tooltip hidden";
    container.appendChild(this.tooltip);

    this.empty = document.createElement("div");
    this.empty.className = "paper-empty";
    this.empty.textContent = "no papers retrieved for this question";
    container.appendChild(this.empty);

    this.details = document.createElement("div");
    this.details.className = "paper-details";
    container.appendChild(this.details);
  }

  render(data: PapersResponse | null, selected: string | null = null): void {
    this.data = data;
    this.svg.replaceChildren();
    this.details.replaceChildren();
    this.tooltip.classList.add("hidden");
    if (!data || data.papers.length === 0) {
      this.empty.classList.remove("hidden");
      return;
    }
    this.empty.classList.add("hidden");

    const ids = data.subgraph.papers;
    const positions = new Map<string, { x: number; y: number }>();
    const cx = 210;
    const cy = 150;
    const radius = Math.min(120, 40 + ids.length * 8);
    ids.forEach((pid, index) => {
      const angle = (2 * Math.PI * index) / ids.length;
      positions.set(pid, { x: cx + radius * Math.cos(angle), y: cy + radius * Math.sin(angle) });
    });

    const highlight = this.neighborSet(selected);
    for (const [citing, cited] of data.subgraph.edges) {
      const from = positions.get(citing);
      const to = positions.get(cited);
      if (!from || !to) continue;
      const line = document.createElementNS(SVG_NS, "line");
      const active = selected !== null && (citing === selected || cited === selected);
      line.setAttribute("class", `citation-edge${active ? " highlighted" : ""}`);
      line.setAttribute("x1", String(from.x));
      line.setAttribute("y1", String(from.y));
      line.setAttribute("x2", String(to.x));
      line.setAttribute("y2", String(to.y));
      this.svg.appendChild(line);
    }

    const byId = new Map(data.papers.map((p) => [p.paper_id, p]));
    for (const pid of ids) {
      const position = positions.get(pid)!;
      const paper = byId.get(pid);
      const group = document.createElementNS(SVG_NS, "g");
      const classes = ["paper-node"];
      if (pid === selected) classes.push("selected");
      else if (highlight.has(pid)) classes.push("neighbor");
      group.setAttribute("class", classes.join(" "));
      group.setAttribute("data-paper-id", pid);
      group.setAttribute("transform", `translate(${position.x}, ${position.y})`);

      const circle = document.createElementNS(SVG_NS, "circle");
      circle.setAttribute("r", "10");
      group.appendChild(circle);

      group.addEventListener("mouseenter", () => {
        this.tooltip.textContent = paper?.title ?? pid;
        this.tooltip.classList.remove("hidden");
      });
      group.addEventListener("mouseleave", () => this.tooltip.classList.add("hidden"));
      group.addEventListener("click", () => this.callbacks.onSelectPaper(pid));
      this.svg.appendChild(group);
    }

    if (selected) {
      const paper = byId.get(selected);
      if (paper) this.renderDetails(paper);
    }
  }

  private neighborSet(selected: string | null): Set<string> {
    if (!selected || !this.data) return new Set();
    const sets = this.data.neighbors[selected];
    if (!sets) return new Set();
    return new Set([...sets.cited_by, ...sets.cites]);
  }

  private renderDetails(paper: PaperDoc): void {
    const title = document.createElement("h3");
    title.textContent = paper.title;
    this.details.appendChild(title);

    const authors = document.createElement("p");
    authors.className = "authors";
    authors.textContent = paper.authors.join(", ");
    this.details.appendChild(authors);

    if (paper.tldr) {
      const tldr = document.createElement("p");
      tldr.className = "tldr";
      tldr.textContent = paper.tldr;
      this.details.appendChild(tldr);
    }

    const abstract = document.createElement("p");
    abstract.className = "abstract";
    abstract.textContent = paper.abstract;
    this.details.appendChild(abstract);

    if (paper.url) {
      const link = document.createElement("a");
      link.href = paper.url;
      link.target = "_blank";
      link.rel = "noopener";
      link.textContent = "open scholarly page";
      this.details.appendChild(link);
    }
  }
}
