/** The set of nodes and edges currently on screen.
 *
 * Invariants, enforced on every mutation:
 *  - no duplicate node ids;
 *  - every visible edge's endpoints are visible (edge-endpoint closure).
 */

import type { Edge, NeighborsResponse, NodeSummary } from "./api.js";

export interface ViewNode {
  id: number;
  label: string;
  mentionCount: number;
}

export interface ViewEdge {
  id: number;
  head: number;
  relation: string;
  tail: number;
  score: number;
}

export class ViewGraph {
  readonly nodes = new Map<number, ViewNode>();
  readonly edges = new Map<number, ViewEdge>();

  addNode(summary: NodeSummary): void {
    // re-adding a known id refreshes the label/count, never duplicates
    this.nodes.set(summary.id, {
      id: summary.id,
      label: summary.canonical,
      mentionCount: summary.mention_count,
    });
  }

  addEdge(edge: Edge): void {
    if (!this.nodes.has(edge.head) || !this.nodes.has(edge.tail)) {
      throw new Error(`edge ${edge.id} references a node that is not visible`);
    }
    this.edges.set(edge.id, {
      id: edge.id,
      head: edge.head,
      relation: edge.relation,
      tail: edge.tail,
      score: edge.score,
    });
  }

  /** Merge a neighbors payload; applying the same payload twice is a no-op. */
  merge(payload: NeighborsResponse): void {
    for (const node of payload.nodes) this.addNode(node);
    for (const edge of payload.edges) this.addEdge(edge);
    this.checkInvariants();
  }

  /** Remove a node and every incident edge, preserving closure. */
  removeNode(id: number): void {
    this.nodes.delete(id);
    for (const [edgeId, edge] of this.edges) {
      if (edge.head === id || edge.tail === id) this.edges.delete(edgeId);
    }
    this.checkInvariants();
  }

  degree(id: number): number {
    let count = 0;
    for (const edge of this.edges.values()) {
      if (edge.head === id || edge.tail === id) count += 1;
    }
    return count;
  }

  checkInvariants(): void {
    for (const edge of this.edges.values()) {
      if (!this.nodes.has(edge.head) || !this.nodes.has(edge.tail)) {
        throw new Error(`closure violated: edge ${edge.id} has a hidden endpoint`);
      }
    }
  }

  /** Order-independent snapshot for equality assertions. */
  snapshot(): string {
    const nodes = [...this.nodes.values()].sort((a, b) => a.id - b.id);
    const edges = [...this.edges.values()].sort((a, b) => a.id - b.id);
    return JSON.stringify({ nodes, edges });
  }
}
