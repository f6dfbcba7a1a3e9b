"""Shared fixture builders for segmentation and pipeline tests."""

from __future__ import annotations

import numpy as np

from brahmi_ocr.imagecore import BinaryImage, GrayImage


def typeset_glyph_page(
    glyphs: list[GrayImage], per_line: int, gap: int = 10, margin: int = 14
) -> GrayImage:
    """Paste gray glyph tiles onto a white page, per_line tiles per text line.

    Tiles keep their own size; darker pixels win where tiles meet the page.
    """
    lines = [glyphs[i : i + per_line] for i in range(0, len(glyphs), per_line)]
    line_heights = [max(g.height for g in line) for line in lines]
    width = 2 * margin + max(
        sum(g.width for g in line) + gap * (len(line) - 1) for line in lines
    )
    height = 2 * margin + sum(line_heights) + gap * (len(lines) - 1)
    page = np.full((height, width), 255, dtype=np.uint8)
    y = margin
    for line, line_h in zip(lines, line_heights):
        x = margin
        for g in line:
            region = page[y : y + g.height, x : x + g.width]
            np.minimum(region, g.pixels, out=region)
            x += g.width + gap
        y += line_h + gap
    return GrayImage(page)


def paste_rect_page(
    rng: np.random.Generator,
    width: int = 120,
    min_band: int = 3,
    min_gap: int = 2,
) -> tuple[BinaryImage, list[dict]]:
    """Random page of solid rectangles laid out so segmentation is exact.

    Each line is a full-height run of rectangles; vertical gaps between
    lines and horizontal gaps between rectangles are at least ``min_gap``.
    Returns the page and the generative layout:
    [{"rows": (y0, y1), "chars": [(x0, x1), ...]}, ...]
    """
    n_lines = int(rng.integers(1, 5))
    lines = []
    y = int(rng.integers(0, 6))
    height_budget = 0
    for _ in range(n_lines):
        band_h = int(rng.integers(min_band, min_band + 8))
        chars = []
        x = int(rng.integers(0, 5))
        for _ in range(int(rng.integers(1, 7))):
            w = int(rng.integers(min_band, min_band + 6))
            if x + w > width - 1:
                break
            chars.append((x, x + w))
            x = x + w + int(rng.integers(min_gap, min_gap + 4))
        if not chars:
            chars = [(0, min_band)]
        lines.append({"rows": (y, y + band_h), "chars": chars})
        y = y + band_h + int(rng.integers(min_gap, min_gap + 5))
        height_budget = y
    height = height_budget + int(rng.integers(1, 6))
    page = np.zeros((height, width), dtype=bool)
    for line in lines:
        y0, y1 = line["rows"]
        for x0, x1 in line["chars"]:
            page[y0:y1, x0:x1] = True
    return BinaryImage(page), lines
