"""Read-only JSON-over-HTTP service for the graph store.

Endpoints:
  GET /api/health
  GET /api/search?q=&limit=
  GET /api/nodes/{id}
  GET /api/nodes/{id}/neighbors?limit=&relation=
  GET /api/stats
Errors are returned as {"error": code, "message": ...} with 400/404 status.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .errors import BindError, NotFound
from .store import EntityNode, GraphStore


def node_summary(node: EntityNode) -> dict:
    return {"id": node.id, "canonical": node.canonical,
            "mention_count": node.mention_count}


def search_payload(store: GraphStore, query: str, limit: int) -> dict:
    return {"query": query,
            "results": [node_summary(n) for n in store.search(query, limit)]}


def neighbors_payload(store: GraphStore, node_id: int, limit: int,
                      relation: str | None) -> dict:
    nodes, edges = store.neighbors(node_id, limit, relation)
    return {"nodes": [node_summary(n) for n in nodes],
            "edges": [e.to_json() for e in edges]}


def create_app(store: GraphStore, cors_origins: list[str] | None = None) -> FastAPI:
    app = FastAPI(title="corpuskg graph service", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins or ["*"],
        allow_methods=["GET"],
        allow_headers=["*"],
    )

    def error(status: int, code: str, message: str) -> JSONResponse:
        return JSONResponse(status_code=status,
                            content={"error": code, "message": message})

    @app.exception_handler(NotFound)
    async def _not_found(request: Request, exc: NotFound):
        return error(404, "not_found", str(exc))

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/search")
    def search(q: str = "", limit: int = 20):
        if limit <= 0:
            return error(400, "bad_request", "limit must be positive")
        return search_payload(store, q, limit)

    @app.get("/api/nodes/{node_id}/neighbors")
    def neighbors(node_id: int, limit: int = 25, relation: str | None = None):
        if limit <= 0:
            return error(400, "bad_request", "limit must be positive")
        return neighbors_payload(store, node_id, limit, relation)

    @app.get("/api/nodes/{node_id}")
    def node(node_id: int):
        return store.node_details(node_id)

    @app.get("/api/stats")
    def stats():
        return store.stats()

    return app


def serve(store: GraphStore, bind: str = "127.0.0.1:8000",
          cors_origins: list[str] | None = None) -> None:
    import uvicorn

    host, _, port_s = bind.partition(":")
    app = create_app(store, cors_origins)
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port_s or 8000),
                    log_level="warning")
    except (OSError, ValueError) as exc:
        raise BindError(f"cannot bind {bind}: {exc}") from exc
