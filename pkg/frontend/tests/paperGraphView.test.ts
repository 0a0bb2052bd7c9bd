// @vitest-environment jsdom
import { beforeEach, describe, expect, it, vi } from "vitest";

import type { PapersResponse } from "../src/model.js";
import { PaperGraphView } from "../src/paperGraphView.js";

function samplePapers(): PapersResponse {
  return {
    query: "How can AI support crowdsourcing quality?",
    papers: [
      {
        paper_id: "A",
        title: "Paper A on quality",
        abstract: "Abstract A.",
        authors: ["Ada"],
        tldr: "tl;dr A",
        url: "https://papers.test/A",
        year: 2020,
        venue: "CHI",
      },
      {
        paper_id: "B",
        title: "Paper B on crowds",
        abstract: "Abstract B.",
        authors: ["Ben", "Bo"],
        tldr: null,
        url: null,
        year: null,
        venue: null,
      },
      {
        paper_id: "C",
        title: "Paper C on agents",
        abstract: "Abstract C.",
        authors: [],
        tldr: null,
        url: null,
        year: null,
        venue: null,
      },
    ],
    subgraph: { papers: ["A", "B", "C"], edges: [["A", "B"], ["C", "A"]] },
    neighbors: {
      A: { cited_by: ["C"], cites: ["B"] },
      B: { cited_by: ["A"], cites: [] },
      C: { cited_by: [], cites: ["A"] },
    },
  };
}

describe("paper graph panel", () => {
  let container: HTMLElement;
  let view: PaperGraphView;
  let selected: string | null;

  beforeEach(() => {
    document.body.innerHTML = "";
    container = document.createElement("div");
    document.body.appendChild(container);
    selected = null;
    view = new PaperGraphView(container, {
      onSelectPaper: vi.fn((paperId: string | null) => {
        selected = paperId;
      }),
    });
  });

  it("renders one node per paper and one line per citation edge", () => {
    view.render(samplePapers());
    expect(container.querySelectorAll(".paper-node")).toHaveLength(3);
    expect(container.querySelectorAll(".citation-edge")).toHaveLength(2);
    expect(container.querySelector(".paper-empty")!.classList.contains("hidden")).toBe(true);
  });

  it("hover tooltip shows exactly the record title", () => {
    view.render(samplePapers());
    const node = container.querySelector('[data-paper-id="B"]')!;
    node.dispatchEvent(new MouseEvent("mouseenter"));
    const tooltip = container.querySelector(".paper-tooltip")!;
    expect(tooltip.classList.contains("hidden")).toBe(false);
    expect(tooltip.textContent).toBe("Paper B on crowds");
    node.dispatchEvent(new MouseEvent("mouseleave"));
    expect(tooltip.classList.contains("hidden")).toBe(true);
  });

  it("clicking a paper selects it; render highlights both neighbor directions", () => {
    const data = samplePapers();
    view.render(data);
    container.querySelector('[data-paper-id="A"]')!.dispatchEvent(new MouseEvent("click"));
    expect(selected).toBe("A");
    view.render(data, "A");
    expect(container.querySelector('[data-paper-id="A"]')!.classList.contains("selected")).toBe(true);
    // A is cited by C and cites B: both highlight
    expect(container.querySelector('[data-paper-id="B"]')!.classList.contains("neighbor")).toBe(true);
    expect(container.querySelector('[data-paper-id="C"]')!.classList.contains("neighbor")).toBe(true);
    expect(container.querySelectorAll(".citation-edge.highlighted")).toHaveLength(2);
  });

  it("selected paper details include title, authors, abstract, tldr, and link", () => {
    view.render(samplePapers(), "A");
    const details = container.querySelector(".paper-details")!;
    expect(details.querySelector("h3")!.textContent).toBe("Paper A on quality");
    expect(details.querySelector(".authors")!.textContent).toBe("Ada");
    expect(details.querySelector(".abstract")!.textContent).toBe("Abstract A.");
    expect(details.querySelector(".tldr")!.textContent).toBe("tl;dr A");
    const link = details.querySelector("a")!;
    expect(link.getAttribute("href")).toBe("https://papers.test/A");
    expect(link.getAttribute("target")).toBe("_blank");
  });

  it("empty retrieval shows the explicit empty state", () => {
    view.render({ query: "q", papers: [], subgraph: { papers: [], edges: [] }, neighbors: {} });
    expect(container.querySelector(".paper-empty")!.classList.contains("hidden")).toBe(false);
    expect(container.querySelectorAll(".paper-node")).toHaveLength(0);
  });
});
