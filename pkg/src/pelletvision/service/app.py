"""FastAPI service exposing the pipeline operations.

Run with ``uvicorn pelletvision.service.app:app`` or ``pelletvision serve``.
Errors carry a ``kind`` field: ``usage`` for bad parameters (HTTP 400) and
``data`` for unreadable or malformed inputs (HTTP 422).
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import pipeline
from ..config import TOOL_VERSION
from ..errors import (CoverageError, EmptyInputError, FormatError,
                      InvalidParameterError, PelletVisionError,
                      ShapeMismatchError)
from ..synth import DEFAULT_CLASS_MIX
from . import schemas

_DATA_ERRORS = (FormatError, EmptyInputError, ShapeMismatchError, CoverageError)


def create_app() -> FastAPI:
    app = FastAPI(title="pelletvision", version=TOOL_VERSION,
                  description="Star-polygon pellet segmentation pipeline")

    @app.exception_handler(PelletVisionError)
    async def pipeline_error(request: Request, exc: PelletVisionError):
        if isinstance(exc, _DATA_ERRORS):
            return JSONResponse(status_code=422,
                                content={"kind": "data", "message": str(exc)})
        if isinstance(exc, InvalidParameterError):
            return JSONResponse(status_code=400,
                                content={"kind": "usage", "message": str(exc)})
        return JSONResponse(status_code=500,
                            content={"kind": "internal", "message": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"kind": "usage", "message": str(exc)})

    @app.get("/v1/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", tool_version=TOOL_VERSION)

    @app.post("/v1/synth", response_model=schemas.SynthResponse)
    def synth(req: schemas.SynthRequest) -> schemas.SynthResponse:
        mix = tuple(req.class_mix) if req.class_mix else DEFAULT_CLASS_MIX
        summary = pipeline.run_synth(
            req.out_dir, req.seed, req.config.resolve(), height=req.height,
            width=req.width, n_objects=req.n_objects, class_mix=mix,
            radius_min=req.radius_min, radius_max=req.radius_max,
            min_gap=req.min_gap)
        return schemas.SynthResponse(**summary)

    @app.post("/v1/gen-targets", response_model=schemas.GenTargetsResponse)
    def gen_targets(req: schemas.GenTargetsRequest) -> schemas.GenTargetsResponse:
        summary = pipeline.run_gen_targets(
            req.labels_path, req.out_dir, req.config.resolve(),
            classes_path=req.classes_path, expand=req.expand)
        return schemas.GenTargetsResponse(**summary)

    @app.post("/v1/postprocess", response_model=schemas.PostprocessResponse)
    def postprocess(req: schemas.PostprocessRequest) -> schemas.PostprocessResponse:
        summary = pipeline.run_postprocess(
            req.out_dir, req.config.resolve(), maps_dir=req.maps_dir,
            tiles_manifest=req.tiles_manifest, image_height=req.image_height,
            image_width=req.image_width, reclassify=req.reclassify)
        return schemas.PostprocessResponse(**summary)

    @app.post("/v1/measure", response_model=schemas.MeasureResponse)
    def measure(req: schemas.MeasureRequest) -> schemas.MeasureResponse:
        summary = pipeline.run_measure(req.labels_path, req.records_path,
                                       req.out_dir, req.config.resolve())
        return schemas.MeasureResponse(**summary)

    @app.post("/v1/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate(req: schemas.EvaluateRequest) -> schemas.EvaluateResponse:
        summary = pipeline.run_evaluate(
            req.pred_path, req.gt_path, req.config.resolve(),
            pred_classes_path=req.pred_classes_path,
            gt_classes_path=req.gt_classes_path, out_path=req.out_path)
        return schemas.EvaluateResponse(**summary)

    @app.post("/v1/split", response_model=schemas.SplitResponse)
    def split(req: schemas.SplitRequest) -> schemas.SplitResponse:
        summary = pipeline.run_split(
            req.out_manifest, req.config.resolve(), req.seed,
            stats_csv=req.stats_csv, classes_dir=req.classes_dir,
            out_stats=req.out_stats)
        return schemas.SplitResponse(**summary)

    @app.post("/v1/normalize", response_model=schemas.NormalizeResponse)
    def normalize(req: schemas.NormalizeRequest) -> schemas.NormalizeResponse:
        summary = pipeline.run_normalize(
            req.inputs, req.out_dir, req.config.resolve(),
            ref_mean=req.ref_mean, ref_std=req.ref_std,
            ref_image=req.ref_image, jobs=req.jobs)
        return schemas.NormalizeResponse(**summary)

    return app


app = create_app()
