// Client-drawn segmentation overlay: rectangles computed straight from the
// manifest intervals, then stroked onto a canvas sized like the page.

import type { SegmentManifest } from "./api.js";

export interface BoxRect {
  kind: "line" | "character";
  x: number;
  y: number;
  width: number;
  height: number;
}

export const LINE_COLOR = "#4080e6";
export const CHARACTER_COLOR = "#e64040";

// Interval ends are exclusive, so width/height are plain differences.
export function manifestRects(manifest: SegmentManifest, pageWidth: number): BoxRect[] {
  const rects: BoxRect[] = [];
  for (const line of manifest.lines) {
    rects.push({
      kind: "line",
      x: 0,
      y: line.rows.start,
      width: pageWidth,
      height: line.rows.end - line.rows.start,
    });
    for (const box of line.characters) {
      rects.push({
        kind: "character",
        x: box.cols.start,
        y: box.rows.start,
        width: box.cols.end - box.cols.start,
        height: box.rows.end - box.rows.start,
      });
    }
  }
  return rects;
}

// The minimal canvas surface the overlay needs; tests record the calls.
// strokeStyle's type matches CanvasRenderingContext2D so a real 2D context
// satisfies the interface; drawOverlay only ever assigns color strings.
export interface StrokeSurface {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  strokeRect(x: number, y: number, width: number, height: number): void;
  clearRect(x: number, y: number, width: number, height: number): void;
}

export function drawOverlay(
  ctx: StrokeSurface,
  rects: BoxRect[],
  canvasWidth: number,
  canvasHeight: number,
  scale = 1,
): void {
  ctx.clearRect(0, 0, canvasWidth, canvasHeight);
  ctx.lineWidth = 1;
  for (const rect of rects) {
    ctx.strokeStyle = rect.kind === "line" ? LINE_COLOR : CHARACTER_COLOR;
    ctx.strokeRect(
      rect.x * scale,
      rect.y * scale,
      rect.width * scale,
      rect.height * scale,
    );
  }
}
