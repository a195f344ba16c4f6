import logging
from pathlib import Path

from fastapi import FastAPI, File, Form, HTTPException, Query, UploadFile
from fastapi.concurrency import run_in_threadpool
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse

from fxnet import __version__
from fxnet.config import Settings, get_settings, load_run_config
from fxnet.errors import InputError, MissingRunError
from fxnet.models import EvolveResponse, HealthResponse, RankingRow, RdcParams, RdcRequest, RdcResponse
from fxnet.pipeline import EvolutionPipeline, load_run
from fxnet.services.dependence import rdc
from fxnet.services.evolution import average_degree_ranking
from fxnet.storage import JobStorage

ALLOWED_TABLE_EXTENSIONS = {".csv", ".tsv", ".txt"}

logger = logging.getLogger(__name__)


def create_app(settings: Settings | None = None) -> FastAPI:
    settings = settings or get_settings()
    storage = JobStorage(output_dir=settings.jobs_dir)
    pipeline = EvolutionPipeline(settings)

    app = FastAPI(title=settings.app_name, version=__version__)

    if settings.environment.lower() == "production":
        allow_origins = settings.allowed_origins
    else:
        allow_origins = list(dict.fromkeys([*settings.allowed_origins, "http://localhost", "http://127.0.0.1"]))

    app.add_middleware(
        CORSMiddleware,
        allow_origins=allow_origins,
        allow_credentials=True,
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )

    def ensure_job_exists(job_id: str) -> None:
        if not storage.job_exists(job_id):
            raise HTTPException(status_code=404, detail="Job not found")

    @app.get("/health", response_model=HealthResponse)
    async def health() -> HealthResponse:
        return HealthResponse(ok=True)

    @app.post("/api/rdc", response_model=RdcResponse)
    def api_rdc(request: RdcRequest) -> RdcResponse:
        params = RdcParams(k=request.k, repetitions=request.repetitions, ridge=request.ridge, seed=request.seed)
        try:
            result = rdc(request.x, request.y, params)
        except InputError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return RdcResponse(value=result.value, repetitions=list(result.repetitions), degenerate=result.degenerate)

    @app.post("/api/evolve", response_model=EvolveResponse)
    async def api_evolve(
        file: UploadFile = File(...),
        base: str | None = Form(default=None),
        input_base: str | None = Form(default=None),
        measure: str | None = Form(default=None),
        window: int | None = Form(default=None),
        smoothing: int | None = Form(default=None),
        k: int | None = Form(default=None),
        repetitions: int | None = Form(default=None),
        ridge: float | None = Form(default=None),
        seed: int | None = Form(default=None),
        year: int | None = Form(default=None),
    ) -> EvolveResponse:
        extension = Path(file.filename or "").suffix.lower()
        if extension not in ALLOWED_TABLE_EXTENSIONS:
            raise HTTPException(
                status_code=400,
                detail=f"Unsupported table type. Allowed: {', '.join(sorted(ALLOWED_TABLE_EXTENSIONS))}",
            )
        table_bytes = await file.read()
        if not table_bytes:
            raise HTTPException(status_code=400, detail="Uploaded file is empty")
        if len(table_bytes) > settings.max_upload_bytes:
            raise HTTPException(status_code=413, detail="Uploaded file too large")

        job_id = storage.create_job({"filename": file.filename})
        input_path = storage.save_bytes(job_id, f"input{extension}", table_bytes)
        overrides = {
            "input": str(input_path),
            "out": str(storage.run_dir(job_id)),
            "base": base,
            "input_base": input_base,
            "measure": measure,
            "window": window,
            "smoothing": smoothing,
            "k": k,
            "repetitions": repetitions,
            "ridge": ridge,
            "seed": seed,
            "year": year,
        }
        storage.update_job(job_id, status="processing")
        try:
            config = load_run_config(overrides=overrides, settings=settings)
            result = await run_in_threadpool(pipeline.run, config)
        except InputError as exc:
            storage.update_job(job_id, status="failed", error=str(exc))
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except Exception as exc:
            logger.exception("job_id=%s status=failed", job_id)
            storage.update_job(job_id, status="failed", error=str(exc))
            raise HTTPException(status_code=500, detail=f"Evolve failed: {exc}") from exc

        storage.update_job(job_id, status="completed", networks=len(result.series), timings_ms=result.timings_ms)
        return EvolveResponse(job_id=job_id, status="completed", networks=len(result.series))

    @app.get("/api/jobs/{job_id}")
    async def get_job(job_id: str):
        ensure_job_exists(job_id)
        return JSONResponse(content=storage.get_job(job_id))

    @app.get("/api/jobs/{job_id}/files/{name:path}")
    async def get_job_file(job_id: str, name: str):
        ensure_job_exists(job_id)
        run_dir = storage.run_dir(job_id).resolve()
        path = (run_dir / name).resolve()
        if not path.is_relative_to(run_dir) or not path.is_file():
            raise HTTPException(status_code=404, detail="File not found")
        media_type = "application/json" if path.suffix == ".json" else "text/csv"
        return FileResponse(path=path, media_type=media_type, filename=path.name)

    @app.get("/api/jobs/{job_id}/ranking", response_model=list[RankingRow])
    def get_job_ranking(job_id: str, year: int | None = Query(default=None)) -> list[RankingRow]:
        ensure_job_exists(job_id)
        try:
            _, series = load_run(storage.run_dir(job_id))
            ranking = average_degree_ranking(series, year)
        except MissingRunError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except InputError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return list(ranking.rows)

    return app


app = create_app()
