"""HTTP service exposing the composite reward to external trainers.

Endpoints: ``POST /v1/reward``, ``POST /v1/reward/batch``, ``GET /healthz``.
Bodies are JSON. A request is ``{"response": str, "gt_score": number,
"spec": {"kind", "r_min", "d_0", "lambda"}}`` with ``spec`` optional.
Malformed bodies get 400; well-formed but out-of-range requests get 422
with a machine-readable ``reason``.
"""

from __future__ import annotations

import json
import logging
import math
import time
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .rewards import KINDS, SCORE_HI, SCORE_LO, RewardSpec, composite_reward

log = logging.getLogger("reward_lab.service")

DECIMALS = 6
MAX_BATCH = 1024


class RequestError(Exception):
    def __init__(self, status: int, reason: str, detail: str):
        self.status = status
        self.reason = reason
        self.detail = detail
        super().__init__(detail)

    def body(self) -> dict:
        return {"error": {"reason": self.reason, "detail": self.detail}}


def _fixed(x: float) -> float:
    return round(float(x), DECIMALS)


def _number(doc: dict, key: str) -> float:
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise RequestError(400, "bad_type", f"{key} must be a number")
    v = float(v)
    if not math.isfinite(v):
        raise RequestError(400, "bad_type", f"{key} must be finite")
    return v


def parse_request(doc: Any, defaults: RewardSpec) -> tuple[str, float, RewardSpec]:
    """Validate one request document: structural problems -> 400, semantic -> 422."""
    if not isinstance(doc, dict):
        raise RequestError(400, "not_an_object", "request must be a JSON object")
    unknown = set(doc) - {"response", "gt_score", "spec"}
    if unknown:
        raise RequestError(400, "unknown_field", f"unknown fields: {sorted(unknown)}")
    for key in ("response", "gt_score"):
        if key not in doc:
            raise RequestError(400, "missing_field", f"missing field {key!r}")
    if not isinstance(doc["response"], str):
        raise RequestError(400, "bad_type", "response must be a string")
    gt = _number(doc, "gt_score")

    spec_doc = doc.get("spec") or {}
    if not isinstance(spec_doc, dict):
        raise RequestError(400, "bad_type", "spec must be an object")
    unknown = set(spec_doc) - {"kind", "r_min", "d_0", "lambda"}
    if unknown:
        raise RequestError(400, "unknown_field", f"unknown spec fields: {sorted(unknown)}")
    kind = spec_doc.get("kind", defaults.kind)
    if not isinstance(kind, str):
        raise RequestError(400, "bad_type", "spec.kind must be a string")
    params = {}
    for wire, attr in (("r_min", "r_min"), ("d_0", "d_0"), ("lambda", "lam")):
        params[attr] = _number(spec_doc, wire) if wire in spec_doc else getattr(defaults, attr)

    if not SCORE_LO <= gt <= SCORE_HI:
        raise RequestError(422, "gt_out_of_range", f"gt_score {gt} outside [{SCORE_LO:g}, {SCORE_HI:g}]")
    if kind not in KINDS:
        raise RequestError(422, "unknown_kind", f"kind {kind!r} not in {list(KINDS)}")
    try:
        spec = RewardSpec(kind=kind, normalize_linear_error=defaults.normalize_linear_error, **params)
    except ValueError as exc:
        raise RequestError(422, "invalid_spec", str(exc)) from exc
    return doc["response"], gt, spec


def handle_reward(doc: Any, defaults: RewardSpec = RewardSpec()) -> dict:
    text, gt, spec = parse_request(doc, defaults)
    b = composite_reward(text, gt, spec)
    return {
        "parsed_score": None if b.score is None else _fixed(b.score),
        "format_ok": b.format_ok,
        "r_acc": _fixed(b.r_acc),
        "r_fmt": _fixed(b.r_fmt),
        "r_total": _fixed(b.r_total),
    }


def handle_batch(docs: Any, defaults: RewardSpec = RewardSpec(), max_batch: int = MAX_BATCH) -> list[dict]:
    """Element i of the result answers element i of the input; bad elements carry an error."""
    if not isinstance(docs, list):
        raise RequestError(400, "not_a_list", "batch body must be a list or {'requests': [...]}")
    if len(docs) > max_batch:
        raise RequestError(413, "batch_too_large", f"batch of {len(docs)} exceeds limit {max_batch}")
    out = []
    for i, doc in enumerate(docs):
        try:
            out.append({"index": i, "ok": True, "result": handle_reward(doc, defaults)})
        except RequestError as exc:
            out.append({"index": i, "ok": False, "status": exc.status, **exc.body()})
    return out


def handle_health(defaults: RewardSpec = RewardSpec(), max_batch: int = MAX_BATCH) -> dict:
    return {
        "status": "ok",
        "version": __version__,
        "defaults": {"kind": defaults.kind, "r_min": defaults.r_min, "d_0": defaults.d_0, "lambda": defaults.lam},
        "max_batch": max_batch,
    }


async def _json_body(request: Request) -> Any:
    raw = await request.body()
    try:
        return json.loads(raw)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise RequestError(400, "malformed_json", f"body is not valid JSON: {exc}") from exc


def create_app(defaults: Optional[RewardSpec] = None, max_batch: int = MAX_BATCH) -> FastAPI:
    defaults = defaults or RewardSpec()
    app = FastAPI(title="reward-lab", version=__version__)

    @app.exception_handler(RequestError)
    async def _request_error(request: Request, exc: RequestError):
        return JSONResponse(exc.body(), status_code=exc.status)

    @app.middleware("http")
    async def _log_requests(request: Request, call_next):
        start = time.perf_counter()
        response = await call_next(request)
        log.info(
            "%s %s %d %.1fms", request.method, request.url.path, response.status_code, 1e3 * (time.perf_counter() - start)
        )
        return response

    @app.post("/v1/reward")
    async def reward(request: Request):
        return handle_reward(await _json_body(request), defaults)

    @app.post("/v1/reward/batch")
    async def reward_batch(request: Request):
        body = await _json_body(request)
        if isinstance(body, dict) and set(body) == {"requests"}:
            body = body["requests"]
        return {"results": handle_batch(body, defaults, max_batch)}

    @app.get("/healthz")
    async def health():
        return handle_health(defaults, max_batch)

    return app
