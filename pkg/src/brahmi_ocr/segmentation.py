"""Projection-profile segmentation of binarized inscriptions.

Lines come from runs of non-blank rows in the horizontal profile,
characters from runs of non-blank columns in each line's vertical
profile. Gaps shorter than ``min_gap`` merge adjacent runs, runs
thinner than ``min_band`` are discarded, and character boxes with
fewer than ``min_ink`` foreground pixels are dropped as specks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagecore import BinaryImage, GrayImage, binary_to_gray

AXES = ("horizontal", "vertical")


class EmptyImage(ValueError):
    pass


class DegenerateBox(ValueError):
    """Glyph carries no ink, nothing to normalize."""


@dataclass(frozen=True)
class Interval:
    """Half-open [start, end) index range."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.end:
            raise ValueError(f"need 0 <= start < end, got [{self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Profile:
    """Per-row (horizontal) or per-column (vertical) foreground counts."""

    axis: str
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        arr = np.asarray(self.values, dtype=np.int64)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class LineBand:
    """One text line: its row range in page coordinates plus the crop."""

    rows: Interval
    image: BinaryImage

    def __post_init__(self) -> None:
        if self.image.height != self.rows.length:
            raise ValueError("crop height must equal the row interval length")


@dataclass(frozen=True)
class CharBox:
    """One character candidate. Intervals are in page coordinates."""

    line_index: int
    cols: Interval
    rows: Interval
    glyph: BinaryImage

    @property
    def ink_pixels(self) -> int:
        return self.glyph.foreground_count


@dataclass(frozen=True)
class SegmentationParams:
    noise_floor: int = 0
    min_band: int = 3
    min_gap: int = 2
    min_ink: int = 5

    def __post_init__(self) -> None:
        if self.noise_floor < 0:
            raise ValueError("noise_floor must be >= 0")
        for name in ("min_band", "min_gap", "min_ink"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


def projection_profile(img: BinaryImage, axis: str) -> Profile:
    """Count foreground pixels per row (horizontal) or per column (vertical)."""
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}")
    if img.pixels.size == 0:
        raise EmptyImage("cannot profile an empty image")
    values = img.pixels.sum(axis=1 if axis == "horizontal" else 0)
    return Profile(axis=axis, values=values)


def find_bands(profile: Profile, params: SegmentationParams | None = None) -> list[Interval]:
    """Maximal runs of indices with profile values above the noise floor.

    Runs separated by a blank gap shorter than ``min_gap`` merge first;
    runs still thinner than ``min_band`` are then dropped.
    """
    params = params or SegmentationParams()
    active = profile.values > params.noise_floor
    runs: list[list[int]] = []
    start = None
    for i, on in enumerate(active):
        if on and start is None:
            start = i
        elif not on and start is not None:
            runs.append([start, i])
            start = None
    if start is not None:
        runs.append([start, len(active)])
    merged: list[list[int]] = []
    for run in runs:
        if merged and run[0] - merged[-1][1] < params.min_gap:
            merged[-1][1] = run[1]
        else:
            merged.append(run)
    return [Interval(s, e) for s, e in merged if e - s >= params.min_band]


def segment_lines(img: BinaryImage, params: SegmentationParams | None = None) -> list[LineBand]:
    """Split a page into text-line bands, top to bottom."""
    params = params or SegmentationParams()
    profile = projection_profile(img, "horizontal")
    bands = []
    for rows in find_bands(profile, params):
        crop = BinaryImage(img.pixels[rows.start : rows.end])
        bands.append(LineBand(rows=rows, image=crop))
    return bands


def segment_characters(
    line: LineBand, params: SegmentationParams | None = None, line_index: int = 0
) -> list[CharBox]:
    """Split one line band into character boxes, left to right.

    Row intervals are tightened to the ink bounds inside each column band
    and reported in page coordinates.
    """
    params = params or SegmentationParams()
    profile = projection_profile(line.image, "vertical")
    boxes: list[CharBox] = []
    for cols in find_bands(profile, params):
        patch = line.image.pixels[:, cols.start : cols.end]
        ink_rows = np.flatnonzero(patch.any(axis=1))
        if ink_rows.size == 0:
            continue
        top, bottom = int(ink_rows[0]), int(ink_rows[-1]) + 1
        glyph = BinaryImage(patch[top:bottom])
        if glyph.foreground_count < params.min_ink:
            continue
        boxes.append(
            CharBox(
                line_index=line_index,
                cols=cols,
                rows=Interval(line.rows.start + top, line.rows.start + bottom),
                glyph=glyph,
            )
        )
    return boxes


def segment_page(
    img: BinaryImage, params: SegmentationParams | None = None
) -> tuple[list[LineBand], list[list[CharBox]]]:
    """Lines plus per-line character boxes for a whole page."""
    params = params or SegmentationParams()
    lines = segment_lines(img, params)
    boxes = [segment_characters(line, params, line_index=i) for i, line in enumerate(lines)]
    return lines, boxes


def fit_to_canvas(content: np.ndarray, side: int, margin: float) -> GrayImage:
    """Scale gray content onto a side x side canvas, aspect preserved.

    The longer content edge maps to floor(side * (1 - 2 * margin)) pixels,
    sampling is nearest-neighbor, and unused canvas stays background 255.
    """
    if side < 8:
        raise ValueError(f"side must be >= 8, got {side}")
    if not 0 <= margin < 0.5:
        raise ValueError(f"margin must lie in [0, 0.5), got {margin}")
    gh, gw = content.shape
    scale = side * (1.0 - 2.0 * margin) / max(gh, gw)
    out_h = max(1, int(gh * scale))
    out_w = max(1, int(gw * scale))
    src_y = np.minimum((((np.arange(out_h) + 0.5) * gh) / out_h).astype(int), gh - 1)
    src_x = np.minimum((((np.arange(out_w) + 0.5) * gw) / out_w).astype(int), gw - 1)
    scaled = content[np.ix_(src_y, src_x)]
    canvas = np.full((side, side), 255, dtype=np.uint8)
    y0 = (side - out_h) // 2
    x0 = (side - out_w) // 2
    canvas[y0 : y0 + out_h, x0 : x0 + out_w] = scaled
    return GrayImage(canvas)


def normalize_glyph(box: CharBox, side: int = 32, margin: float = 0.1) -> GrayImage:
    """Render a character crop as the classifier's canonical gray input."""
    if box.glyph.foreground_count == 0:
        raise DegenerateBox("glyph has no foreground pixels")
    return fit_to_canvas(binary_to_gray(box.glyph).pixels, side, margin)


def boxes_to_manifest(boxes: list[CharBox]) -> str:
    """Tab-separated manifest, one box per line:

    line_index, col start/end, row start/end, ink pixel count.
    """
    rows = [
        f"{b.line_index}\t{b.cols.start}\t{b.cols.end}\t{b.rows.start}\t{b.rows.end}\t{b.ink_pixels}"
        for b in boxes
    ]
    return "\n".join(rows) + ("\n" if rows else "")
