"""Whole-page recognition: preprocess, segment, classify, and report.

The structured report is the wire format served over HTTP and consumed by
the browser client; its field names are part of the public contract.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataset import CANVAS_MARGIN, LabelMap, to_model_input
from .imagecore import BinaryImage, GrayImage
from .preprocess import PreprocessConfig, preprocess
from .segmentation import (
    CharBox,
    Interval,
    SegmentationParams,
    normalize_glyph,
    segment_page,
)
from .tensornet import ModelGraph, forward
from .tensornet.ops import PROB_FLOOR

DEFAULT_TOP_K = 3


@dataclass(frozen=True)
class CharPrediction:
    """One classified glyph: its box plus descending (label, probability) pairs."""

    box: CharBox
    top_k: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        if not self.top_k:
            raise ValueError("top_k must contain at least one entry")
        probs = [p for _, p in self.top_k]
        if any(not 0.0 < p <= 1.0 for p in probs):
            raise ValueError("probabilities must lie in (0, 1]")
        if any(a < b for a, b in zip(probs, probs[1:])):
            raise ValueError("top_k probabilities must be descending")

    @property
    def label(self) -> str:
        return self.top_k[0][0]


@dataclass(frozen=True)
class LineRecognition:
    """Row band of one text line plus its left-to-right predictions."""

    rows: Interval
    predictions: tuple[CharPrediction, ...]


@dataclass(frozen=True)
class RecognitionResult:
    lines: tuple[LineRecognition, ...]
    model_id: str
    pre_cfg: PreprocessConfig
    seg_params: SegmentationParams
    page_height: int
    page_width: int

    def __post_init__(self) -> None:
        for line in self.lines:
            if line.rows.end > self.page_height:
                raise ValueError("line band exceeds page height")
            for pred in line.predictions:
                if pred.box.cols.end > self.page_width:
                    raise ValueError("character box exceeds page width")

    def predictions(self) -> list[CharPrediction]:
        """All predictions in reading order."""
        return [p for line in self.lines for p in line.predictions]


def _top_k_pairs(probs: np.ndarray, labels: LabelMap, k: int) -> tuple[tuple[str, float], ...]:
    # Stable sort on the negated row: ties resolve to the lowest class index.
    order = np.argsort(-probs, kind="stable")[:k]
    return tuple(
        (labels.name_of(int(i)), max(float(probs[i]), PROB_FLOOR)) for i in order
    )


def recognize_page(
    img: GrayImage,
    model: ModelGraph,
    labels: LabelMap,
    pre_cfg: PreprocessConfig | None = None,
    seg_params: SegmentationParams | None = None,
    *,
    top_k: int = DEFAULT_TOP_K,
    model_id: str = "",
) -> RecognitionResult:
    """Run the full page workflow and assemble a structured result.

    Every segmented character appears exactly once, in reading order
    (top-to-bottom lines, left-to-right within a line).  A blank page gives
    a result with zero lines.
    """
    pre_cfg = pre_cfg or PreprocessConfig()
    seg_params = seg_params or SegmentationParams()
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    channels, side_h, side_w = model.input_shape
    if channels != 1 or side_h != side_w:
        raise ValueError("model must take square single-channel inputs")
    if len(labels) != model.num_classes:
        raise ValueError("label map size must equal the model's class count")
    k = min(top_k, model.num_classes)

    binary, _ = preprocess(img, pre_cfg)
    lines, boxes_per_line = segment_page(binary, seg_params)

    flat_boxes = [box for boxes in boxes_per_line for box in boxes]
    probs = np.zeros((0, model.num_classes))
    if flat_boxes:
        batch = np.stack(
            [to_model_input(normalize_glyph(b, side=side_h, margin=CANVAS_MARGIN))
             for b in flat_boxes]
        )[:, None]
        probs = forward(model, batch)

    out_lines = []
    cursor = 0
    for line, boxes in zip(lines, boxes_per_line):
        preds = tuple(
            CharPrediction(box=box, top_k=_top_k_pairs(probs[cursor + j], labels, k))
            for j, box in enumerate(boxes)
        )
        cursor += len(boxes)
        out_lines.append(LineRecognition(rows=line.rows, predictions=preds))
    return RecognitionResult(
        lines=tuple(out_lines),
        model_id=model_id,
        pre_cfg=pre_cfg,
        seg_params=seg_params,
        page_height=img.height,
        page_width=img.width,
    )


def _mask_rows(img: BinaryImage) -> list[str]:
    return ["".join("#" if v else "." for v in row) for row in img.pixels]


def _rows_mask(rows: list[str]) -> BinaryImage:
    if not rows:
        raise ValueError("glyph rows must be non-empty")
    grid = [[c == "#" for c in row] for row in rows]
    return BinaryImage(np.array(grid, dtype=bool))


def _interval_dict(iv: Interval) -> dict:
    return {"start": iv.start, "end": iv.end}


def _char_dict(pred: CharPrediction) -> dict:
    return {
        "line_index": pred.box.line_index,
        "cols": _interval_dict(pred.box.cols),
        "rows": _interval_dict(pred.box.rows),
        "ink_pixels": pred.box.ink_pixels,
        "glyph": _mask_rows(pred.box.glyph),
        "top_k": [{"label": name, "probability": p} for name, p in pred.top_k],
    }


def result_to_dict(result: RecognitionResult) -> dict:
    """The structured report as a JSON-ready mapping (the wire schema)."""
    return {
        "model_id": result.model_id,
        "page": {"height": result.page_height, "width": result.page_width},
        "params": {
            "preprocess": {
                "median_kernel": result.pre_cfg.median_kernel,
                "polarity": result.pre_cfg.polarity,
                "threshold_override": result.pre_cfg.threshold_override,
            },
            "segmentation": {
                "noise_floor": result.seg_params.noise_floor,
                "min_band": result.seg_params.min_band,
                "min_gap": result.seg_params.min_gap,
                "min_ink": result.seg_params.min_ink,
            },
        },
        "lines": [
            {
                "rows": _interval_dict(line.rows),
                "characters": [_char_dict(p) for p in line.predictions],
            }
            for line in result.lines
        ],
    }


def to_report(result: RecognitionResult, format: str = "text") -> bytes:
    """Render a result as bytes.

    ``text``: one line per detected text line, space-separated top-1 labels.
    ``structured``: JSON document mirroring the result fields exactly.
    """
    if format == "text":
        rows = [" ".join(p.label for p in line.predictions) for line in result.lines]
        text = "\n".join(rows) + ("\n" if rows else "")
        return text.encode()
    if format == "structured":
        return json.dumps(result_to_dict(result)).encode()
    raise ValueError(f"format must be 'text' or 'structured', got {format!r}")


def result_from_json(data: bytes | str) -> RecognitionResult:
    """Parse a structured report back into a RecognitionResult."""
    doc = json.loads(data)
    try:
        lines = []
        for line in doc["lines"]:
            preds = []
            for ch in line["characters"]:
                box = CharBox(
                    line_index=ch["line_index"],
                    cols=Interval(ch["cols"]["start"], ch["cols"]["end"]),
                    rows=Interval(ch["rows"]["start"], ch["rows"]["end"]),
                    glyph=_rows_mask(ch["glyph"]),
                )
                pairs = tuple((e["label"], e["probability"]) for e in ch["top_k"])
                preds.append(CharPrediction(box=box, top_k=pairs))
            lines.append(
                LineRecognition(
                    rows=Interval(line["rows"]["start"], line["rows"]["end"]),
                    predictions=tuple(preds),
                )
            )
        return RecognitionResult(
            lines=tuple(lines),
            model_id=doc["model_id"],
            pre_cfg=PreprocessConfig(**doc["params"]["preprocess"]),
            seg_params=SegmentationParams(**doc["params"]["segmentation"]),
            page_height=doc["page"]["height"],
            page_width=doc["page"]["width"],
        )
    except (KeyError, TypeError) as e:
        raise ValueError(f"malformed result document: {e}") from e
