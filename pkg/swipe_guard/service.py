"""HTTP front end for `verify`.

POST /verify scores one swipe, GET /healthz reports the loaded model and
POST /reload re-reads the bundle file the service was started with.
"""
import logging
from pathlib import Path
from threading import Lock
from typing import Optional, Union

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
import uvicorn

from .bundle import ModelBundle, load_bundle, parse_request, verify
from .errors import DataError, ValidationError
from .settings import ServiceSettings

LOGGER = logging.getLogger('swg.service')


class VerifyBody(BaseModel):
    touch: list[list[float]] = Field(min_length=2)
    screen: list[int] = Field(min_length=2, max_length=2)
    accel: Optional[list[list[float]]] = None


class VerifyResult(BaseModel):
    bot_score: float
    decision: str
    tau: float
    model_version: str


class BundleHolder:
    """Current bundle; `swap` replaces it whole so a request sees either the old or the new one."""

    def __init__(self, bundle: ModelBundle, path: Optional[str] = None, tau: Optional[float] = None):
        self._lock = Lock()
        self._path = path
        self._tau = tau
        self._bundle = self._with_tau(bundle)

    def _with_tau(self, bundle: ModelBundle) -> ModelBundle:
        return bundle if self._tau is None else bundle.with_tau(self._tau)

    @property
    def bundle(self) -> ModelBundle:
        return self._bundle

    @property
    def path(self) -> Optional[str]:
        return self._path

    def swap(self, bundle: ModelBundle) -> ModelBundle:
        bundle = self._with_tau(bundle)
        with self._lock:
            old, self._bundle = self._bundle, bundle
        LOGGER.info('bundle %s replaced by %s', old.model_version, bundle.model_version)
        return old

    def reload(self) -> ModelBundle:
        if self._path is None:
            raise ValidationError('the service was not started from a bundle file')
        return self.swap(load_bundle(self._path))


def create_app(bundle: Union[ModelBundle, str, Path], tau: Optional[float] = None,
               holder: Optional[BundleHolder] = None) -> FastAPI:
    if holder is None:
        if isinstance(bundle, ModelBundle):
            holder = BundleHolder(bundle, tau=tau)
        else:
            holder = BundleHolder(load_bundle(bundle), str(bundle), tau)
    app = FastAPI(title='swipe-guard', version='1.0.0')
    app.state.holder = holder

    @app.exception_handler(RequestValidationError)
    async def request_validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={'detail': str(exc)})

    @app.exception_handler(ValidationError)
    @app.exception_handler(DataError)
    async def swipe_error_handler(request: Request, exc: Exception):
        LOGGER.debug('%s %s rejected: %s', request.method, request.url.path, exc)
        return JSONResponse(status_code=400, content={'detail': str(exc)})

    @app.post('/verify', response_model=VerifyResult)
    def verify_swipe(body: VerifyBody):
        response = verify(holder.bundle, parse_request(body.model_dump()))
        return VerifyResult(**response._asdict())

    @app.get('/healthz')
    def healthz():
        current = holder.bundle
        return {'status': 'ok', 'model_version': current.model_version, 'fusion_mode': current.fusion_mode.value,
                'tau': current.tau}

    @app.post('/reload')
    def reload():
        holder.reload()
        return {'model_version': holder.bundle.model_version}

    return app


def serve(settings: ServiceSettings):
    app = create_app(settings.bundle, settings.tau)
    LOGGER.info('serving bundle %s on %s:%d', app.state.holder.bundle.model_version, settings.host, settings.port)
    uvicorn.run(app, host=settings.host, port=settings.port, log_config=None)
