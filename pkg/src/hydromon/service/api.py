"""HTTP face of a monitoring project: read views plus label/train writes.

The app wraps one ProjectState. Reads serve whatever the state holds;
the two mutating routes (apply labels, retrain) go through a single
writer lock, and a retrain runs as a background job the client polls.
While a job runs, further writes answer 409 busy.
"""

from __future__ import annotations

import math
import os
import tempfile
import threading
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..ingest import format_timestamp, parse_timestamp
from .pipeline import PipelineError, apply_labels, pipeline_run
from .state import STAGES, ProjectState, ServiceError, load_state, save_state


@dataclass
class _JobRegistry:
    jobs: dict = field(default_factory=dict)
    counter: int = 0

    def create(self) -> str:
        self.counter += 1
        job_id = f"job-{self.counter}"
        self.jobs[job_id] = {"id": job_id, "status": "queued", "stage": None, "error": None}
        return job_id


class AppContext:
    def __init__(self, state: ProjectState, state_path=None):
        self.state = state
        self.state_path = state_path
        self.lock = threading.Lock()
        self.registry = _JobRegistry()
        self.active_job: str | None = None

    def busy(self) -> bool:
        if self.active_job is None:
            return False
        return self.registry.jobs[self.active_job]["status"] in ("queued", "running")

    def persist(self) -> None:
        if self.state_path is None:
            return
        # write-then-rename so a crash cannot leave a half-written state file
        directory = os.path.dirname(os.path.abspath(self.state_path)) or "."
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        os.close(fd)
        try:
            save_state(self.state, tmp)
            os.replace(tmp, self.state_path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)


def _safe(x: float):
    x = float(x)
    return x if math.isfinite(x) else None


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _parse_when(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        return parse_timestamp(text)


def _train_job(ctx: AppContext, job_id: str) -> None:
    import copy

    job = ctx.registry.jobs[job_id]
    job["status"] = "running"
    try:
        work = copy.deepcopy(ctx.state)
        for stage in ("voting", "bank", "score"):
            job["stage"] = stage
            work = pipeline_run(state=work, until=stage)
        with ctx.lock:
            ctx.state = work
            ctx.persist()
        job["status"] = "complete"
    except Exception as exc:
        cause = exc.cause if isinstance(exc, PipelineError) else exc
        job["status"] = "failed"
        job["error"] = str(cause)


def build_app(state: ProjectState | None = None, state_path=None) -> FastAPI:
    if state is None:
        if state_path is None:
            raise ServiceError("build_app needs a state or a state file path")
        state = load_state(state_path)
    ctx = AppContext(state, state_path)
    app = FastAPI(title="condition monitoring service", docs_url=None, redoc_url=None)
    app.state.ctx = ctx
    v1 = "/api/v1"

    @app.get(v1 + "/health")
    def health():
        s = ctx.state
        complete = [e["stage"] for e in s.manifest if e["status"] == "complete"]
        return {
            "status": "ok",
            "stages": STAGES,
            "complete": complete,
            "stale": list(s.stale),
            "busy": ctx.busy(),
        }

    @app.get(v1 + "/state")
    def project_state():
        s = ctx.state
        return {
            "config": s.config.to_dict(),
            "manifest": s.manifest,
            "stale": list(s.stale),
            "states": {str(k): v for k, v in s.states.items()},
            "n_rows": None if s.dataset is None else s.dataset.n,
            "n_train": s.n_train,
            "algorithms": sorted(s.assignments),
            "active_algorithm": s.config.active_algorithm,
            "busy": ctx.busy(),
        }

    @app.get(v1 + "/embedding")
    def embedding():
        s = ctx.state
        if s.embedding is None:
            return _error(404, "no embedding yet; run the pipeline first")
        coords = s.embedding.coordinates
        stamps = s.embedding.timestamps
        points = []
        for i in range(len(coords)):
            p = {"row": i, "coords": [float(c) for c in coords[i]]}
            if stamps is not None:
                p["timestamp"] = format_timestamp(stamps[i])
            points.append(p)
        return {"out_dims": coords.shape[1], "points": points}

    @app.get(v1 + "/clusters")
    def clusters(algo: str | None = None):
        s = ctx.state
        if not s.assignments:
            return _error(404, "no clustering yet; run the pipeline first")
        name = algo or s.config.active_algorithm
        if name not in s.assignments:
            return _error(404, f"no result for algorithm {name!r}")
        a = s.assignments[name]
        out = {
            "algorithm": name,
            "active": s.config.active_algorithm,
            "algorithms": sorted(s.assignments),
            "n_clusters": a.n_clusters,
            "labels": a.labels.tolist(),
            "states": {str(k): v for k, v in s.states.items()} or None,
            "state_labels": None,
        }
        if s.state_assignment is not None and name == s.config.active_algorithm:
            out["state_labels"] = s.state_assignment.labels.tolist()
        return out

    @app.get(v1 + "/signals")
    def signals(rows: str = ""):
        s = ctx.state
        if s.dataset is None:
            return _error(404, "no dataset yet")
        try:
            wanted = [int(r) for r in rows.split(",") if r.strip() != ""]
        except ValueError:
            return _error(400, f"rows must be a comma-separated list of row indices, got {rows!r}")
        if not wanted:
            return _error(400, "pass ?rows=i,j,... with at least one row index")
        if len(wanted) > 1000:
            return _error(400, "at most 1000 rows per request")
        out_rows = []
        for r in wanted:
            if not 0 <= r < s.dataset.n:
                return _error(400, f"row {r} out of range [0, {s.dataset.n})")
            out_rows.append({
                "row": r,
                "timestamp": format_timestamp(s.dataset.timestamps[r]),
                "values": [_safe(v) for v in s.dataset.data[r]],
            })
        return {"signals": s.dataset.signals, "units": s.dataset.units, "rows": out_rows}

    @app.get(v1 + "/scores")
    def scores(request: Request):
        s = ctx.state
        if s.scores is None:
            return _error(404, "no scores yet; train first")
        if "score" in s.stale or "bank" in s.stale:
            return _error(409, "scores are stale after a label change; retrain first")
        lo = request.query_params.get("from")
        hi = request.query_params.get("to")
        try:
            lo_e = None if lo is None else _parse_when(lo)
            hi_e = None if hi is None else _parse_when(hi)
        except Exception as exc:
            return _error(400, f"bad time bound: {exc}")
        sc = s.scores
        rows = []
        for i, ts in enumerate(sc["timestamps"]):
            if lo_e is not None and ts < lo_e:
                continue
            if hi_e is not None and ts > hi_e:
                continue
            rows.append({
                "timestamp": format_timestamp(ts),
                "nearest_state": sc["nearest"][i],
                "dev": {str(lab): _safe(sc["dev"][i][j])
                        for j, lab in enumerate(sc["state_labels"])},
                "mae": {str(lab): _safe(sc["mae"][i][j])
                        for j, lab in enumerate(sc["state_labels"])},
                "global_dev": _safe(sc["global_dev"][i]),
                "global_mae": _safe(sc["global_mae"][i]),
            })
        return {
            "state_labels": sc["state_labels"],
            "states": {str(k): v for k, v in s.states.items()},
            "rows": rows,
        }

    @app.get(v1 + "/jobs/{job_id}")
    def job_status(job_id: str):
        job = ctx.registry.jobs.get(job_id)
        if job is None:
            return _error(404, f"no such job {job_id!r}")
        return job

    @app.post(v1 + "/labels")
    async def post_labels(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "body must be JSON")
        overrides = body.get("overrides") if isinstance(body, dict) else body
        if not isinstance(overrides, list):
            return _error(400, 'body must be {"overrides": [...]} or a bare list')
        normalized = [
            {"clusters": sorted(int(c) for c in e.get("clusters", [])),
             "name": str(e.get("name", "")).strip(), "tag": e.get("tag", "unknown")}
            for e in overrides if isinstance(e, dict)
        ]
        if len(normalized) != len(overrides):
            return _error(400, "every label entry must be an object")
        with ctx.lock:
            if ctx.busy():
                return _error(409, "a training job is running; try again when it finishes")
            if normalized == ctx.state.label_overrides:
                return {
                    "status": "already-applied",
                    "states": {str(k): v for k, v in ctx.state.states.items()},
                    "stale": list(ctx.state.stale),
                }
            try:
                apply_labels(ctx.state, normalized)
            except ServiceError as exc:
                return _error(400, str(exc))
            ctx.persist()
            return {
                "status": "applied",
                "states": {str(k): v for k, v in ctx.state.states.items()},
                "stale": list(ctx.state.stale),
            }

    @app.post(v1 + "/train")
    def post_train():
        with ctx.lock:
            if ctx.busy():
                return _error(409, "a training job is already running")
            if not ctx.state.assignments:
                return _error(409, "no clustering yet; run the pipeline first")
            if not ctx.state.states and not ctx.state.config.auto_accept:
                return _error(409, "no labels applied yet; label the clusters first")
            job_id = ctx.registry.create()
            ctx.active_job = job_id
        thread = threading.Thread(target=_train_job, args=(ctx, job_id), daemon=True)
        thread.start()
        return JSONResponse({"job": job_id}, status_code=202)

    return app


def serve(state_path, port: int = 8800, host: str = "127.0.0.1") -> None:
    import uvicorn

    uvicorn.run(build_app(state_path=state_path), host=host, port=port, log_level="warning")
