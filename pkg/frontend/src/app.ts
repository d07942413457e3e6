/** Explorer controller: a small state machine over the view graph.
 *
 * States: empty -> searched -> expanded, with error reachable from any state.
 * Every async action carries a sequence number; responses arriving after a
 * newer action started are discarded, so slow requests can never clobber the
 * result of a later click.
 */

import { ApiClient, ApiError } from "./api.js";
import type { NodeDetail, NodeSummary } from "./api.js";
import { layout } from "./layout.js";
import type { Point } from "./layout.js";
import { ViewGraph } from "./viewgraph.js";

export type AppState = "empty" | "searched" | "expanded" | "error";

export class App {
  state: AppState = "empty";
  candidates: NodeSummary[] = [];
  readonly view = new ViewGraph();
  selection: number | null = null;
  details: NodeDetail | null = null;
  positions = new Map<number, Point>();
  errorMessage: string | null = null;
  notices: string[] = [];

  private sequence = 0;
  private layoutSeed: number;

  constructor(
    private api: ApiClient,
    options: { layoutSeed?: number } = {},
  ) {
    this.layoutSeed = options.layoutSeed ?? 42;
  }

  /** Empty or whitespace-only queries issue no request at all. */
  async onSearch(query: string): Promise<void> {
    if (query.trim() === "") return;
    const my = ++this.sequence;
    try {
      const response = await this.api.search(query);
      if (my !== this.sequence) return; // superseded by a newer action
      this.candidates = response.results;
      this.state = "searched";
      this.errorMessage = null;
    } catch (error) {
      if (my !== this.sequence) return;
      this.state = "error";
      this.errorMessage = error instanceof Error ? error.message : String(error);
      // view deliberately left unchanged
    }
  }

  /** Selecting a search candidate adds it to the view and selects it. */
  selectCandidate(candidate: NodeSummary): void {
    this.view.addNode(candidate);
    this.selection = candidate.id;
    this.relayout();
  }

  /** Expand a visible node: one neighbors request plus one details request. */
  async onNodeClick(nodeId: number): Promise<void> {
    const my = ++this.sequence;
    try {
      const [neighbors, detail] = await Promise.all([
        this.api.neighbors(nodeId),
        this.api.node(nodeId),
      ]);
      if (my !== this.sequence) return; // stale response, discard
      this.view.merge(neighbors);
      this.selection = nodeId;
      this.details = detail;
      this.state = "expanded";
      this.errorMessage = null;
      this.relayout();
    } catch (error) {
      if (my !== this.sequence) return;
      if (error instanceof ApiError && error.status === 404) {
        this.view.removeNode(nodeId);
        if (this.selection === nodeId) this.selection = null;
        this.notices.push(`node ${nodeId} no longer exists and was removed`);
        this.relayout();
      } else {
        this.state = "error";
        this.errorMessage = error instanceof Error ? error.message : String(error);
      }
    }
  }

  private relayout(): void {
    this.positions = layout(this.view, { seed: this.layoutSeed }, this.positions);
  }
}
