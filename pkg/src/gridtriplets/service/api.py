"""HTTP+JSON API over the experiment store.

Endpoints:
    POST /experiments                       create an experiment
    GET  /experiments/{id}/next?worker=     next task payload or done signal
    POST /experiments/{id}/answers          submit one answer
    GET  /experiments/{id}/triplets.csv     deduplicated triplet export
    GET  /experiments/{id}/stats            counts and per-worker stats
    /assets/...                             catalog images

Task payloads carry no catch-trial markers; catch grids look exactly
like normal grids on the wire.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from ..collection import GridSpec
from ..econ import HitPricing
from ..errors import ConstraintError
from .experiments import ExperimentStore, SubmissionRejected


class CatalogEntry(BaseModel):
    id: int
    image: str


class SpecBody(BaseModel):
    n: int
    k: int


class PricingBody(BaseModel):
    hit_price: float = 0.10
    usable_screens_per_hit: int = 8
    catch_screens_per_hit: int = 2
    per_triplet_price: float = 0.01
    platform_fee_fraction: float = 0.10
    catch_fraction: float = 0.20


class CreateExperimentBody(BaseModel):
    catalog: list[CatalogEntry]
    spec: SpecBody
    target_screens: int = Field(ge=0)
    pricing: PricingBody | None = None
    seed: int | None = None
    instruction: str = "Select the images most similar to the probe."


class AnswerBody(BaseModel):
    task_id: str
    worker: str
    selected: list[int]
    elapsed_ms: int


def create_app(data_dir, assets_dir=None) -> FastAPI:
    """Build the collection app around a data directory."""
    store = ExperimentStore(data_dir)
    app = FastAPI(title="gridtriplets collection service")
    app.state.store = store

    if assets_dir is not None:
        app.mount("/assets", StaticFiles(directory=str(assets_dir)), name="assets")

    @app.exception_handler(SubmissionRejected)
    async def _rejected(_, exc: SubmissionRejected):
        status = 404 if exc.code in ("unknown_experiment", "unknown_task") else 409
        return JSONResponse(status_code=status, content={"code": exc.code, "detail": exc.detail})

    @app.post("/experiments")
    def create_experiment(body: CreateExperimentBody):
        pricing = HitPricing(**body.pricing.model_dump()) if body.pricing else None
        try:
            spec = GridSpec(body.spec.n, body.spec.k)
            experiment_id = store.create_experiment(
                catalog=[e.model_dump() for e in body.catalog],
                spec=spec,
                target_screens=body.target_screens,
                pricing=pricing,
                seed=body.seed,
                instruction=body.instruction,
            )
        except ConstraintError as err:
            raise HTTPException(status_code=422, detail=str(err)) from None
        return {"experiment_id": experiment_id}

    @app.get("/experiments/{experiment_id}/next")
    def next_task(experiment_id: str, worker: str = Query(...)):
        served = store.next_task(experiment_id, worker)
        if served is None:
            return {"done": True}
        exp = store.get_experiment(experiment_id)
        images = {entry["id"]: entry["image"] for entry in exp.catalog}
        return {
            "task_id": served.task.task_id,
            "probe": f"/assets/{images[served.task.probe]}",
            "grid": [f"/assets/{images[obj]}" for obj in served.task.grid],
            "k": exp.spec.k,
            "instruction": exp.instruction,
        }

    @app.post("/experiments/{experiment_id}/answers")
    def submit_answer(experiment_id: str, body: AnswerBody):
        record = store.submit_answer(
            experiment_id, body.worker, body.task_id, body.selected, body.elapsed_ms
        )
        return {"ok": True, "task_id": record.task_id}

    @app.get("/experiments/{experiment_id}/triplets.csv")
    def triplets_csv(
        experiment_id: str,
        exclude_failed_catch_workers: float | None = Query(default=None, ge=0.0, le=1.0),
    ):
        text, raw, unique = store.export_triplets(experiment_id, exclude_failed_catch_workers)
        return PlainTextResponse(
            text,
            media_type="text/csv",
            headers={"X-Raw-Triplets": str(raw), "X-Unique-Triplets": str(unique)},
        )

    @app.get("/experiments/{experiment_id}/stats")
    def stats(experiment_id: str):
        return store.stats(experiment_id)

    return app
