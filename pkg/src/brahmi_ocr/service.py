"""HTTP facade over the recognition pipeline.

Endpoints (all JSON unless noted):

* ``GET /api/health`` -> ``{"status": "ok"}``
* ``GET /api/labels`` -> ``{"labels": [...], "model_id": ...}``; 503 when the
  app was created without a model.
* ``POST /api/recognize`` -> the structured recognition report, byte-identical
  to ``pipeline.to_report(result, "structured")``.
* ``POST /api/preview`` -> stage output for interactive tuning: stage
  ``preprocess`` returns the threshold fields plus the binarized page as
  base64 PNG; stage ``segment`` returns the box manifest and, on request,
  an overlay PNG.

POST bodies are multipart forms.  The image arrives either as an ``image``
file part or as a ``token`` field naming a previous upload; preview responses
include the token so slider iterations upload once.  Parameter fields are
strings mirroring the CLI flags (``median_kernel``, ``polarity``,
``threshold_override``, ``noise_floor``, ``min_band``, ``min_gap``,
``min_ink``, plus ``top_k`` for recognize and ``stage``/``overlay`` for
preview).  Invalid parameters give 422 naming the field; undecodable or
oversized uploads give 400; unexpected failures give 500 with an opaque id.
"""

from __future__ import annotations

import base64
import secrets
import threading
import time
import uuid

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from .dataset import LabelMap
from .imagecore import GrayImage, decode_image, encode_image, to_grayscale
from .pipeline import recognize_page, to_report
from .preprocess import PreprocessConfig, preprocess
from .segmentation import SegmentationParams, segment_page
from .tensornet import load_checkpoint

DEFAULT_MAX_UPLOAD = 10 * 1024 * 1024
DEFAULT_TOKEN_TTL = 600.0

_PRE_FIELDS = ("median_kernel", "polarity", "threshold_override")
_SEG_FIELDS = ("noise_floor", "min_band", "min_gap", "min_ink")


class RequestProblem(Exception):
    """Maps straight to an HTTP error response."""

    def __init__(self, status: int, payload: dict):
        super().__init__(payload.get("error", ""))
        self.status = status
        self.payload = payload


def _bad_request(message: str) -> RequestProblem:
    return RequestProblem(400, {"error": message})


def _invalid_field(field: str, message: str) -> RequestProblem:
    return RequestProblem(422, {"error": message, "field": field})


def _field_problem(exc: ValueError, candidates: tuple[str, ...]) -> RequestProblem:
    message = str(exc)
    field = next((name for name in candidates if name in message), candidates[0])
    return _invalid_field(field, message)


class TokenStore:
    """Uploaded bytes keyed by opaque tokens with a fixed lifetime."""

    def __init__(self, ttl: float = DEFAULT_TOKEN_TTL, clock=time.monotonic):
        self._ttl = ttl
        self._clock = clock
        self._items: dict[str, tuple[bytes, float]] = {}
        self._lock = threading.Lock()

    def _prune(self) -> None:
        now = self._clock()
        dead = [k for k, (_, expiry) in self._items.items() if expiry <= now]
        for k in dead:
            del self._items[k]

    def put(self, data: bytes) -> str:
        token = secrets.token_urlsafe(16)
        with self._lock:
            self._prune()
            self._items[token] = (data, self._clock() + self._ttl)
        return token

    def get(self, token: str) -> bytes | None:
        with self._lock:
            self._prune()
            item = self._items.get(token)
        return item[0] if item else None


def _form_str(form, name: str) -> str | None:
    value = form.get(name)
    if value is None or not isinstance(value, str) or value == "":
        return None
    return value


def _form_int(form, name: str, default: int | None) -> int | None:
    raw = _form_str(form, name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise _invalid_field(name, f"{name} must be an integer") from None


def _pre_cfg_from(form) -> PreprocessConfig:
    try:
        return PreprocessConfig(
            median_kernel=_form_int(form, "median_kernel", 3),
            polarity=_form_str(form, "polarity") or "auto",
            threshold_override=_form_int(form, "threshold_override", None),
        )
    except ValueError as e:
        raise _field_problem(e, _PRE_FIELDS) from e


def _seg_params_from(form) -> SegmentationParams:
    try:
        return SegmentationParams(
            noise_floor=_form_int(form, "noise_floor", 0),
            min_band=_form_int(form, "min_band", 3),
            min_gap=_form_int(form, "min_gap", 2),
            min_ink=_form_int(form, "min_ink", 5),
        )
    except ValueError as e:
        raise _field_problem(e, _SEG_FIELDS) from e


def _overlay_png(gray: GrayImage, lines, boxes_per_line) -> bytes:
    """Box borders in red, line band edges in blue, over the gray page."""
    rgb = np.stack([gray.pixels] * 3, axis=-1).copy()
    blue = np.array([64, 128, 230], dtype=np.uint8)
    red = np.array([230, 64, 64], dtype=np.uint8)
    for line in lines:
        for r in (line.rows.start, line.rows.end - 1):
            rgb[r, :] = blue
    for boxes in boxes_per_line:
        for box in boxes:
            r0, r1 = box.rows.start, box.rows.end - 1
            c0, c1 = box.cols.start, box.cols.end - 1
            rgb[r0, c0 : c1 + 1] = red
            rgb[r1, c0 : c1 + 1] = red
            rgb[r0 : r1 + 1, c0] = red
            rgb[r0 : r1 + 1, c1] = red
    import io

    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def _manifest_dict(lines, boxes_per_line) -> dict:
    return {
        "lines": [
            {
                "rows": {"start": line.rows.start, "end": line.rows.end},
                "characters": [
                    {
                        "line_index": box.line_index,
                        "cols": {"start": box.cols.start, "end": box.cols.end},
                        "rows": {"start": box.rows.start, "end": box.rows.end},
                        "ink_pixels": box.ink_pixels,
                    }
                    for box in boxes
                ],
            }
            for line, boxes in zip(lines, boxes_per_line)
        ]
    }


def _pre_cfg_dict(cfg: PreprocessConfig) -> dict:
    return {
        "median_kernel": cfg.median_kernel,
        "polarity": cfg.polarity,
        "threshold_override": cfg.threshold_override,
    }


def _seg_params_dict(params: SegmentationParams) -> dict:
    return {
        "noise_floor": params.noise_floor,
        "min_band": params.min_band,
        "min_gap": params.min_gap,
        "min_ink": params.min_ink,
    }


def create_app(
    model_path: str | None = None,
    *,
    bundle=None,
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD,
    token_ttl: float = DEFAULT_TOKEN_TTL,
    clock=time.monotonic,
) -> FastAPI:
    """Build the service; the model loads once here and is read-only after."""
    if model_path is not None and bundle is None:
        bundle = load_checkpoint(model_path)
    labels = LabelMap(bundle.labels) if bundle else None
    store = TokenStore(ttl=token_ttl, clock=clock)
    app = FastAPI(title="brahmi-ocr service")

    def problem_handler(request: Request, exc: RequestProblem) -> JSONResponse:
        return JSONResponse(status_code=exc.status, content=exc.payload)

    def internal_handler(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(
            status_code=500,
            content={"error": "internal error", "error_id": uuid.uuid4().hex},
        )

    app.add_exception_handler(RequestProblem, problem_handler)
    app.add_exception_handler(Exception, internal_handler)

    async def _image_from(form) -> tuple[GrayImage, str]:
        """Resolve the request image; returns it with its reuse token."""
        upload = form.get("image")
        token = _form_str(form, "token")
        if upload is not None and not isinstance(upload, str):
            data = await upload.read()
            if len(data) == 0:
                raise _bad_request("empty image upload")
            if len(data) > max_upload_bytes:
                raise _bad_request(
                    f"upload exceeds the {max_upload_bytes} byte limit"
                )
            token = store.put(data)
        elif token is not None:
            data = store.get(token)
            if data is None:
                raise _bad_request("unknown or expired token")
        else:
            raise _bad_request("provide an 'image' file or a 'token' field")
        try:
            img = decode_image(data)
        except ValueError as e:
            raise _bad_request(f"undecodable image: {e}") from e
        return (to_grayscale(img) if not isinstance(img, GrayImage) else img), token

    @app.get("/api/health")
    async def health():
        return {"status": "ok"}

    @app.get("/api/labels")
    async def labels_endpoint():
        if bundle is None:
            raise RequestProblem(503, {"error": "no model loaded"})
        return {"labels": list(bundle.labels), "model_id": bundle.model_id}

    @app.post("/api/recognize")
    async def recognize_endpoint(request: Request):
        if bundle is None:
            raise RequestProblem(503, {"error": "no model loaded"})
        form = await request.form()
        img, _ = await _image_from(form)
        pre_cfg = _pre_cfg_from(form)
        seg_params = _seg_params_from(form)
        top_k = _form_int(form, "top_k", 3)
        if top_k < 1:
            raise _invalid_field("top_k", "top_k must be >= 1")
        result = recognize_page(
            img, bundle.model, labels, pre_cfg, seg_params,
            top_k=top_k, model_id=bundle.model_id,
        )
        return Response(content=to_report(result, "structured"),
                        media_type="application/json")

    @app.post("/api/preview")
    async def preview_endpoint(request: Request):
        form = await request.form()
        stage = _form_str(form, "stage")
        if stage not in ("preprocess", "segment"):
            raise _invalid_field("stage", "stage must be 'preprocess' or 'segment'")
        img, token = await _image_from(form)
        pre_cfg = _pre_cfg_from(form)
        binary, otsu = preprocess(img, pre_cfg)
        if stage == "preprocess":
            return {
                "stage": "preprocess",
                "token": token,
                "otsu": {
                    "threshold": otsu.threshold,
                    "within_class_variance": otsu.within_class_variance,
                    "class_weights": list(otsu.class_weights),
                    "class_means": list(otsu.class_means),
                },
                "params": {"preprocess": _pre_cfg_dict(pre_cfg)},
                "image_png": base64.b64encode(encode_image(binary, "png")).decode(),
            }
        seg_params = _seg_params_from(form)
        lines, boxes_per_line = segment_page(binary, seg_params)
        overlay = (_form_str(form, "overlay") or "").lower() in ("1", "true", "yes", "on")
        return {
            "stage": "segment",
            "token": token,
            "params": {
                "preprocess": _pre_cfg_dict(pre_cfg),
                "segmentation": _seg_params_dict(seg_params),
            },
            "manifest": _manifest_dict(lines, boxes_per_line),
            "overlay_png": (
                base64.b64encode(_overlay_png(img, lines, boxes_per_line)).decode()
                if overlay else None
            ),
        }

    return app
