// DOM builders for the console panels. Everything goes through
// createElement/textContent, so service strings are never interpreted as
// markup. Each render function clears its root and repaints from the
// view-model state it is handed.

import { RollbackItem, TripleDict } from "./api.js";
import { GraphView, HistoryRow, TranscriptEntry } from "./console.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) {
    node.setAttribute(k, v);
  }
  return node;
}

export function tripleText(t: TripleDict): string {
  return `${t.s} ${t.r} ${t.o}`;
}

function rollbackText(item: RollbackItem): string {
  const key = item.key === null ? "(file)" : item.key;
  return `${key} ${tripleText(item.triple)} [${item.reason}]`;
}

function traceList(label: string, items: string[]): HTMLElement {
  const wrap = el("div", "trace-list");
  wrap.appendChild(el("div", "trace-label", `${label} (${items.length})`));
  const ul = el("ul");
  for (const item of items) {
    ul.appendChild(el("li", undefined, item));
  }
  wrap.appendChild(ul);
  return wrap;
}

function entryBubble(entry: TranscriptEntry): HTMLElement {
  const bubble = el("div", `bubble bubble-${entry.kind}`);
  bubble.appendChild(el("div", "bubble-user", entry.user));
  bubble.appendChild(el("div", "bubble-utterance", entry.utterance));

  if (entry.kind === "error") {
    bubble.appendChild(el("div", "error", entry.error ?? "unknown error"));
    return bubble;
  }

  if (entry.kind === "generate") {
    const text = entry.answer ? entry.answer.answer : "no answer";
    bubble.appendChild(el("div", "answer", text));
    return bubble;
  }

  bubble.appendChild(el("div", "conflict", `conflict: ${entry.conflict}`));
  if (entry.alreadyPresent) {
    bubble.appendChild(el("div", "note", "already present — nothing to do"));
  }
  bubble.appendChild(traceList("rollbacks", entry.rollbacks.map(rollbackText)));
  bubble.appendChild(traceList("edits", entry.edits.map(tripleText)));
  bubble.appendChild(traceList("augmentations", entry.augmentations.map(tripleText)));
  if (entry.answer) {
    bubble.appendChild(el("div", "answer", `${entry.answer.answer} (weight ${entry.answer.weight})`));
  }
  return bubble;
}

export function renderTranscript(root: HTMLElement, entries: readonly TranscriptEntry[]): void {
  root.textContent = "";
  for (const entry of entries) {
    root.appendChild(entryBubble(entry));
  }
}

export function renderHistory(
  root: HTMLElement,
  rows: readonly HistoryRow[],
  onRollback: (key: string) => void,
): void {
  root.textContent = "";
  if (rows.length === 0) {
    root.appendChild(el("div", "empty", "no requests yet"));
    return;
  }
  for (const row of rows) {
    const div = el("div", row.stale ? "history-row stale" : "history-row");
    div.appendChild(el("span", "history-id", `#${row.requestId}`));
    div.appendChild(el("span", "history-user", row.user));
    div.appendChild(el("span", "history-summary", row.summary));
    for (const badge of row.keys) {
      const cls = badge.status === "Active" ? "badge badge-active" : "badge badge-rolledback";
      div.appendChild(el("span", cls, `${badge.key}: ${badge.status}`));
      const btn = el("button", "undo", "undo");
      btn.disabled = row.stale || badge.status !== "Active";
      btn.addEventListener("click", () => onRollback(badge.key));
      div.appendChild(btn);
    }
    root.appendChild(div);
  }
}

// Nodes are placed on a circle in the order the service returned them
// (it sorts lexicographically), so the same neighborhood always lands in
// the same spots.
export function renderGraph(root: HTMLElement, view: GraphView | null): void {
  root.textContent = "";
  if (view === null) {
    root.appendChild(el("div", "empty", "no neighborhood loaded"));
    return;
  }
  if (view.empty) {
    root.appendChild(el("div", "empty", `nothing around ${view.subject}`));
    return;
  }

  const size = 420;
  const cx = size / 2;
  const cy = size / 2;
  const radius = size / 2 - 60;
  const pos = new Map<string, { x: number; y: number }>();
  view.nodes.forEach((name, i) => {
    const angle = (2 * Math.PI * i) / view.nodes.length - Math.PI / 2;
    pos.set(name, {
      x: cx + radius * Math.cos(angle),
      y: cy + radius * Math.sin(angle),
    });
  });

  const svg = svgEl("svg", {
    viewBox: `0 0 ${size} ${size}`,
    width: String(size),
    height: String(size),
    class: "graph",
  });
  for (const edge of view.edges) {
    const a = pos.get(edge.source);
    const b = pos.get(edge.target);
    if (!a || !b) {
      continue;
    }
    svg.appendChild(
      svgEl("line", {
        x1: String(a.x),
        y1: String(a.y),
        x2: String(b.x),
        y2: String(b.y),
        class: "graph-edge",
      }),
    );
    const label = svgEl("text", {
      x: String((a.x + b.x) / 2),
      y: String((a.y + b.y) / 2 - 4),
      class: "graph-edge-label",
      "text-anchor": "middle",
    });
    label.textContent = edge.relation;
    svg.appendChild(label);
  }
  for (const name of view.nodes) {
    const p = pos.get(name)!;
    const cls = name === view.subject ? "graph-node graph-node-subject" : "graph-node";
    svg.appendChild(svgEl("circle", { cx: String(p.x), cy: String(p.y), r: "16", class: cls }));
    const label = svgEl("text", {
      x: String(p.x),
      y: String(p.y + 30),
      class: "graph-node-label",
      "text-anchor": "middle",
    });
    label.textContent = name;
    svg.appendChild(label);
  }
  root.appendChild(svg);
}

export function setStatus(root: HTMLElement, text: string, isError: boolean): void {
  root.textContent = text;
  root.className = isError ? "status status-error" : "status";
}
