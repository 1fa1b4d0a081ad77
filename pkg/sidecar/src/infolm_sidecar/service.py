"""FastAPI app implementing the scoring library's backend wire protocol.

    GET  /v1/model_info
    POST /v1/masked_distributions

Status codes: 400 malformed body, 413 oversize batch, 422 over-length
text (with a per-text locus), 500 with an opaque id on model failure,
503 while the model is loading.
"""

from __future__ import annotations

import logging
import uuid

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .model import MaskedLanguageModel, SidecarConfig, TextTooLong

logger = logging.getLogger("infolm_sidecar")


class DistributionRequest(BaseModel):
    texts: list[str] = Field(min_length=1)
    temperature: float = Field(default=1.0, gt=0)
    top_k: int | None = Field(default=None, ge=1)


def create_app(config: SidecarConfig, load_model: bool = True) -> FastAPI:
    app = FastAPI(title="infolm-sidecar")
    app.state.config = config
    app.state.model = MaskedLanguageModel(config) if load_model else None

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def model_or_503():
        model = app.state.model
        if model is None:
            return None, JSONResponse(
                status_code=503, content={"detail": "model is loading"}
            )
        return model, None

    @app.get("/v1/model_info")
    async def model_info():
        model, busy = model_or_503()
        if busy is not None:
            return busy
        return model.model_info()

    @app.post("/v1/masked_distributions")
    async def masked_distributions(request: DistributionRequest):
        model, busy = model_or_503()
        if busy is not None:
            return busy
        if len(request.texts) > config.max_batch:
            return JSONResponse(
                status_code=413,
                content={
                    "detail": f"batch of {len(request.texts)} exceeds "
                    f"max_batch {config.max_batch}"
                },
            )
        top_k = request.top_k if request.top_k is not None else config.top_k
        results = []
        for index, text in enumerate(request.texts):
            try:
                results.append(
                    model.masked_distributions(
                        text, request.temperature, top_k, index
                    )
                )
            except TextTooLong as exc:
                return JSONResponse(
                    status_code=422,
                    content={
                        "detail": {
                            "error": "text too long or empty",
                            "index": exc.index,
                            "tokens": exc.tokens,
                            "limit": exc.limit,
                        }
                    },
                )
            except Exception:
                incident = uuid.uuid4().hex
                logger.exception("model failure (incident %s)", incident)
                return JSONResponse(
                    status_code=500,
                    content={"detail": f"model failure; incident {incident}"},
                )
        return {"results": results}

    return app
