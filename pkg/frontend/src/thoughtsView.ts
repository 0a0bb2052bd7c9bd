/**
 * AI Thoughts: the rationale behind one generation edge.
 *
 * Shows the action the agent chose, the narrative result of executing
 * it (verbatim, whitespace preserved), and the agent's spoken summary.
 * Depth iterations also list the alternate questions it discarded.
 */

import type { ThoughtDoc } from "./model.js";

export class ThoughtsView {
  constructor(private container: HTMLElement) {
    this.renderIdle();
  }

  renderIdle(): void {
    this.container.replaceChildren();
    const hint = document.createElement("div");
    hint.className = "thoughts-idle";
    hint.textContent = "click an edge to see why the agent generated that question";
    this.container.appendChild(hint);
  }

  renderMissing(thoughtId: string): void {
    this.container.replaceChildren();
    const message = document.createElement("div");
    message.className = "thoughts-missing";
    message.textContent = `thought ${thoughtId} could not be loaded (inconsistent session?)`;
    this.container.appendChild(message);
  }

  render(annotation: string, thought: ThoughtDoc): void {
    this.container.replaceChildren();

    const heading = document.createElement("h3");
    heading.setAttribute("data-role", "thought-action");
    heading.textContent = annotation;
    this.container.appendChild(heading);

    const speak = document.createElement("p");
    speak.className = "thought-speak";
    speak.setAttribute("data-role", "thought-speak");
    speak.textContent = thought.speak;
    this.container.appendChild(speak);

    const narrative = document.createElement("pre");
    narrative.className = "thought-narrative";
    narrative.setAttribute("data-role", "thought-narrative");
    narrative.textContent = thought.action_result;
    this.container.appendChild(narrative);

    if (thought.discarded_rqs.length > 0) {
      const label = document.createElement("h4");
      label.textContent = "alternatives the agent set aside";
      this.container.appendChild(label);
      const list = document.createElement("ul");
      list.className = "discarded-rqs";
      for (const rq of thought.discarded_rqs) {
        const item = document.createElement("li");
        item.textContent = rq;
        list.appendChild(item);
      }
      this.container.appendChild(list);
    }

    const reasoning = document.createElement("details");
    const summary = document.createElement("summary");
    summary.textContent = "full reasoning";
    reasoning.appendChild(summary);
    for (const [label, value] of [
      ["thought", thought.text],
      ["reasoning", thought.reasoning],
      ["plan", thought.plan],
      ["criticism", thought.criticism],
    ] as const) {
      const row = document.createElement("p");
      row.textContent = `${label}: ${value}`;
      reasoning.appendChild(row);
    }
    this.container.appendChild(reasoning);
  }
}
