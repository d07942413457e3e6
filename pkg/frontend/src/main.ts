/** Thin DOM shell over the tested controller. All behavior (state machine,
 * view merging, layout, stale-response handling) lives in App; this file only
 * wires DOM events in and renders state out. */

import { ApiClient } from "./api.js";
import { App } from "./app.js";

const BASE_URL =
  new URLSearchParams(window.location.search).get("service") ?? "http://127.0.0.1:8000";

const app = new App(new ApiClient(BASE_URL, (url) => fetch(url)));

const searchInput = document.querySelector<HTMLInputElement>("#search")!;
const searchButton = document.querySelector<HTMLButtonElement>("#go")!;
const candidateList = document.querySelector<HTMLUListElement>("#candidates")!;
const canvas = document.querySelector<SVGSVGElement>("#graph")!;
const detailsPanel = document.querySelector<HTMLDivElement>("#details")!;
const banner = document.querySelector<HTMLDivElement>("#banner")!;

const SVG_NS = "http://www.w3.org/2000/svg";

function render(): void {
  banner.textContent = app.state === "error" ? `error: ${app.errorMessage}` : "";
  banner.hidden = app.state !== "error";

  candidateList.replaceChildren(
    ...app.candidates.map((candidate) => {
      const item = document.createElement("li");
      item.textContent = `${candidate.canonical} (${candidate.mention_count})`;
      item.onclick = () => {
        app.selectCandidate(candidate);
        void expand(candidate.id);
      };
      return item;
    }),
  );
  if (app.candidates.length === 0 && app.state === "searched") {
    const item = document.createElement("li");
    item.textContent = "no matches";
    candidateList.append(item);
  }

  canvas.replaceChildren();
  for (const edge of app.view.edges.values()) {
    const a = app.positions.get(edge.head);
    const b = app.positions.get(edge.tail);
    if (!a || !b) continue;
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(a.x + 400));
    line.setAttribute("y1", String(a.y + 300));
    line.setAttribute("x2", String(b.x + 400));
    line.setAttribute("y2", String(b.y + 300));
    line.setAttribute("stroke", "#888");
    line.setAttribute("marker-end", "url(#arrow)");
    canvas.append(line);
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String((a.x + b.x) / 2 + 400));
    label.setAttribute("y", String((a.y + b.y) / 2 + 296));
    label.setAttribute("font-size", "10");
    label.textContent = edge.relation;
    canvas.append(label);
  }
  for (const node of app.view.nodes.values()) {
    const p = app.positions.get(node.id);
    if (!p) continue;
    const group = document.createElementNS(SVG_NS, "g");
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", String(p.x + 400));
    circle.setAttribute("cy", String(p.y + 300));
    circle.setAttribute("r", "14");
    circle.setAttribute("fill", node.id === app.selection ? "#4a90d9" : "#ddd");
    circle.setAttribute("stroke", "#333");
    group.append(circle);
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(p.x + 400));
    label.setAttribute("y", String(p.y + 324));
    label.setAttribute("text-anchor", "middle");
    label.setAttribute("font-size", "11");
    label.textContent = `${node.label} [${app.view.degree(node.id)}]`;
    group.append(label);
    group.addEventListener("click", () => void expand(node.id));
    canvas.append(group);
  }

  if (app.details) {
    detailsPanel.replaceChildren();
    const title = document.createElement("h3");
    title.textContent = app.details.canonical;
    detailsPanel.append(title);
    const meta = document.createElement("p");
    meta.textContent =
      `mentions: ${app.details.mention_count}, degree: ${app.details.degree}, ` +
      `aliases: ${app.details.aliases.join(", ")}`;
    detailsPanel.append(meta);
    const heading = document.createElement("h4");
    heading.textContent = "source papers";
    detailsPanel.append(heading);
    const list = document.createElement("ul");
    for (const paper of app.details.paper_titles) {
      const item = document.createElement("li");
      item.textContent = paper;
      list.append(item);
    }
    detailsPanel.append(list);
  }

  for (const notice of app.notices.splice(0)) {
    console.warn(notice);
  }
}

async function expand(nodeId: number): Promise<void> {
  await app.onNodeClick(nodeId);
  render();
}

async function runSearch(): Promise<void> {
  await app.onSearch(searchInput.value);
  render();
}

searchButton.addEventListener("click", () => void runSearch());
searchInput.addEventListener("keydown", (event) => {
  if (event.key === "Enter") void runSearch();
});

render();
