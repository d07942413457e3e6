/** Typed client for the graph service JSON API. The fetch implementation is
 * injectable so tests can run against recorded fixtures. */

export interface NodeSummary {
  id: number;
  canonical: string;
  mention_count: number;
}

export interface NodeDetail {
  id: number;
  canonical: string;
  aliases: string[];
  mention_count: number;
  paper_titles: string[];
  degree: number;
}

export interface Provenance {
  abstract_id: string;
  sentence_index: number;
  title?: string;
  journal?: string;
  year?: number;
  sentence?: string;
}

export interface Edge {
  id: number;
  head: number;
  relation: string;
  tail: number;
  score: number;
  provenance: Provenance[];
}

export interface SearchResponse {
  query: string;
  results: NodeSummary[];
}

export interface NeighborsResponse {
  nodes: NodeSummary[];
  edges: Edge[];
}

export interface StatsResponse {
  nodes: number;
  edges: number;
  per_relation: Record<string, number>;
}

export interface FetchResponse {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (url: string) => Promise<FetchResponse>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike,
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path);
    if (!response.ok) {
      let message = `HTTP ${response.status}`;
      try {
        const body = (await response.json()) as { message?: string };
        if (body && typeof body.message === "string") message = body.message;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, message);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.get("/api/health");
  }

  search(query: string, limit = 20): Promise<SearchResponse> {
    const q = encodeURIComponent(query);
    return this.get(`/api/search?q=${q}&limit=${limit}`);
  }

  node(id: number): Promise<NodeDetail> {
    return this.get(`/api/nodes/${id}`);
  }

  neighbors(id: number, limit = 25, relation?: string): Promise<NeighborsResponse> {
    let path = `/api/nodes/${id}/neighbors?limit=${limit}`;
    if (relation !== undefined) path += `&relation=${encodeURIComponent(relation)}`;
    return this.get(path);
  }

  stats(): Promise<StatsResponse> {
    return this.get("/api/stats");
  }
}
