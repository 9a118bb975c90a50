"""HTTP API over the session manager; the UI and CLI are both clients of it."""

from __future__ import annotations

import os

from fastapi import FastAPI, Request, Response, UploadFile
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .config import Settings
from .errors import (InvalidCluster, InvalidTransition, InvariantViolation,
                     JobAlreadyRunning, LatexToolchainFailed,
                     LayoutCommandFailed, OutlineSyntaxError, StaleVersion,
                     StorageUnavailable, SurveygenError, UnknownJob,
                     UnknownReference, UnknownSection, UnknownSession,
                     UnsupportedFormat, UploadTooLarge)
from .pipeline import EXPORT_FORMATS
from .sessions import SessionManager

_STATUS = {
    UnknownSession: 404,
    UnknownJob: 404,
    UnknownReference: 404,
    UnknownSection: 404,
    InvalidTransition: 409,
    JobAlreadyRunning: 409,
    StaleVersion: 409,
    InvariantViolation: 422,
    OutlineSyntaxError: 422,
    InvalidCluster: 422,
    UploadTooLarge: 413,
    UnsupportedFormat: 415,
    LayoutCommandFailed: 502,
    LatexToolchainFailed: 502,
    StorageUnavailable: 503,
}


def _status_for(exc: SurveygenError) -> int:
    for cls, code in _STATUS.items():
        if isinstance(exc, cls):
            return code
    return 400


class CreateSessionRequest(BaseModel):
    title: str = Field(min_length=1, max_length=500)
    criterion: str | None = None


class StageRequest(BaseModel):
    confirm: bool = False
    force: bool = False


class ClusterEditRequest(BaseModel):
    version: int
    ref_id: str
    target: int


class OutlineEditRequest(BaseModel):
    version: int
    text: str | None = None
    op: str | None = None
    index: int | None = None
    level: int | None = None
    title: str | None = None
    target: int | None = None


class SectionEditRequest(BaseModel):
    version: int
    body: str


class AssetToggleRequest(BaseModel):
    ref_id: str
    asset_index: int
    enabled: bool


def create_app(settings: Settings | None = None,
               manager: SessionManager | None = None) -> FastAPI:
    settings = settings or Settings.from_env()
    manager = manager or SessionManager(settings)
    app = FastAPI(title="surveygen", version=__version__)
    app.state.manager = manager

    @app.exception_handler(SurveygenError)
    async def _domain_error(_request: Request, exc: SurveygenError):
        return JSONResponse(status_code=_status_for(exc),
                            content={"error": type(exc).__name__,
                                     "detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _value_error(_request: Request, exc: ValueError):
        return JSONResponse(status_code=422,
                            content={"error": "ValueError", "detail": str(exc)})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "version": __version__}

    @app.get("/sessions")
    def list_sessions():
        return manager.list_sessions()

    @app.post("/sessions", status_code=201)
    def create_session(payload: CreateSessionRequest):
        manifest = manager.create_session(payload.title, payload.criterion)
        return manager.describe(manifest["session_id"])

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return manager.describe(session_id)

    @app.post("/sessions/{session_id}/references")
    def upload_reference(session_id: str, file: UploadFile):
        raw = file.file.read()
        record = manager.upload_reference(session_id,
                                          file.filename or "upload", raw)
        return {"reference": record,
                "state": manager.describe(session_id)["state"]}

    @app.post("/sessions/{session_id}/stages/{stage}", status_code=202)
    def run_stage(session_id: str, stage: str,
                  payload: StageRequest | None = None):
        payload = payload or StageRequest()
        job = manager.run_stage(session_id, stage, confirm=payload.confirm,
                                options={"force": payload.force})
        return job.snapshot()

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        return manager.job(job_id).snapshot()

    @app.patch("/sessions/{session_id}/clusters")
    def edit_clusters(session_id: str, payload: ClusterEditRequest):
        return manager.edit_clusters(session_id, payload.version,
                                     payload.ref_id, payload.target)

    @app.patch("/sessions/{session_id}/outline")
    def edit_outline(session_id: str, payload: OutlineEditRequest):
        edit = {k: v for k, v in payload.model_dump().items()
                if k != "version" and v is not None}
        return manager.edit_outline(session_id, payload.version, edit)

    @app.patch("/sessions/{session_id}/sections/{index}")
    def edit_section(session_id: str, index: int, payload: SectionEditRequest):
        return manager.edit_section(session_id, index, payload.version,
                                    payload.body)

    @app.patch("/sessions/{session_id}/assets")
    def toggle_asset(session_id: str, payload: AssetToggleRequest):
        return manager.toggle_asset(session_id, payload.ref_id,
                                    payload.asset_index, payload.enabled)

    @app.get("/sessions/{session_id}/export")
    def export_session(session_id: str, format: str = "markdown"):
        if format not in EXPORT_FORMATS:
            raise ValueError(f"format must be one of {', '.join(EXPORT_FORMATS)}")
        bundle = manager.export_bundle(session_id, format)
        return Response(
            content=bundle.to_zip(), media_type="application/zip",
            headers={"Content-Disposition":
                     f'attachment; filename="survey-{format}.zip"',
                     "X-Export-Warnings": str(len(bundle.warnings))})

    if settings.frontend_dir and os.path.isdir(settings.frontend_dir):
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=settings.frontend_dir, html=True),
                  name="ui")

    return app


def create_default_app() -> FastAPI:
    """Factory for `uvicorn --factory surveygen.service:create_default_app`."""
    return create_app(Settings.from_env())
