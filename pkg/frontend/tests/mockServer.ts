/** Fixture-backed fetch double.
 *
 * Routes are exact URL matches onto recorded JSON payloads. Each route can
 * carry a delay (to simulate a slow backend) or an HTTP error status. Every
 * request is logged so tests can assert exact request counts.
 */

import type { FetchLike, FetchResponse } from "../src/api.js";

export interface Route {
  body: unknown;
  status?: number;
  delayMs?: number;
}

export class MockServer {
  readonly requests: string[] = [];
  private routes = new Map<string, Route>();

  route(url: string, route: Route): void {
    this.routes.set(url, route);
  }

  countMatching(fragment: string): number {
    return this.requests.filter((url) => url.includes(fragment)).length;
  }

  fetch: FetchLike = async (url: string): Promise<FetchResponse> => {
    this.requests.push(url);
    const route = this.routes.get(url);
    if (!route) {
      return {
        ok: false,
        status: 404,
        json: async () => ({ error: "not_found", message: `no route for ${url}` }),
      };
    }
    if (route.delayMs) {
      await new Promise((resolve) => setTimeout(resolve, route.delayMs));
    }
    const status = route.status ?? 200;
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => route.body,
    };
  };
}
