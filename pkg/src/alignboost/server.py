"""HTTP service that serves blinded rating tasks and records responses.

Raters authenticate with a bearer token; the task view exposes only LEFT and
RIGHT bar-plot payloads plus the patient table. The unblinding map stays in
the store and is reachable only through the admin export.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Header, HTTPException, Request
from fastapi.responses import FileResponse, PlainTextResponse

from .experiment import DuplicateResponseError, ExperimentStore, OutOfOrderError


def _bearer(authorization: str | None) -> str:
    if not authorization or not authorization.startswith("Bearer "):
        raise HTTPException(status_code=401, detail="missing bearer token")
    return authorization.removeprefix("Bearer ").strip()


def create_app(store: ExperimentStore) -> FastAPI:
    app = FastAPI(title="alignboost rating service", docs_url=None, redoc_url=None)

    def rater_from(authorization: str | None) -> str:
        rater = store.rater_for_token(_bearer(authorization))
        if rater is None:
            raise HTTPException(status_code=401, detail="unknown token")
        return rater

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/task")
    def get_task(authorization: str | None = Header(default=None)):
        rater = rater_from(authorization)
        done, total = store.progress(rater)
        task = store.current_task(rater)
        if task is None:
            return {"done": True, "completed": done, "total": total}
        view = task.blinded_view()
        view["progress"] = {"completed": done, "total": total}
        return view

    @app.post("/response")
    async def post_response(request: Request, authorization: str | None = Header(default=None)):
        rater = rater_from(authorization)
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(status_code=422, detail="body must be JSON") from None
        if not isinstance(body, dict):
            raise HTTPException(status_code=422, detail="body must be a JSON object")
        task_id = body.get("task_id")
        choice = body.get("choice")
        confidence = body.get("confidence")
        if not isinstance(task_id, str):
            raise HTTPException(status_code=422, detail="task_id must be a string")
        try:
            store.append_response(rater, task_id, choice, confidence)
        except DuplicateResponseError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        except OutOfOrderError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        done, total = store.progress(rater)
        return {"ok": True, "completed": done, "total": total}

    @app.get("/export")
    def export(authorization: str | None = Header(default=None)):
        if _bearer(authorization) != store.admin_token:
            raise HTTPException(status_code=403, detail="admin token required")
        return PlainTextResponse("\n".join(store.export_lines()) + "\n", media_type="text/plain")

    @app.get("/static/{name:path}")
    def static(name: str):
        base = (store.root / "static").resolve()
        target = (base / name).resolve()
        if not str(target).startswith(str(base)) or not target.is_file():
            raise HTTPException(status_code=404, detail="not found")
        return FileResponse(target)

    return app


def serve(store_dir: str | Path, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    store = ExperimentStore(store_dir)
    uvicorn.run(create_app(store), host=host, port=port, log_level="warning")
