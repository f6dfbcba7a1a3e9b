// Pure formatting helpers behind the page: every string shown in the
// workflow panel comes from one of these, and each value traces to a
// service response field.

import type {
  PreprocessPreview,
  RecognitionResult,
  SegmentPreview,
} from "./api.js";

// The threshold readout is a pass-through of the server's Otsu statistics.
export function formatThreshold(preview: PreprocessPreview): string {
  return `threshold ${preview.otsu.threshold}`;
}

export function formatVariance(preview: PreprocessPreview): string {
  return `within-class variance ${preview.otsu.within_class_variance.toFixed(3)}`;
}

export function formatBoxCounts(preview: SegmentPreview): string {
  const lines = preview.manifest.lines.length;
  const boxes = preview.manifest.lines.reduce(
    (sum, line) => sum + line.characters.length,
    0,
  );
  return `${lines} line${lines === 1 ? "" : "s"}, ${boxes} character${boxes === 1 ? "" : "s"}`;
}

export interface PredictionRow {
  label: string;
  percent: string; // e.g. "97.3%"
}

export interface ResultLineView {
  text: string; // space-joined top-1 labels
  characters: PredictionRow[][];
}

export function resultView(result: RecognitionResult): ResultLineView[] {
  return result.lines.map((line) => ({
    text: line.characters.map((c) => c.top_k[0].label).join(" "),
    characters: line.characters.map((c) =>
      c.top_k.map((p) => ({
        label: p.label,
        percent: `${(p.probability * 100).toFixed(1)}%`,
      })),
    ),
  }));
}

export function copyableText(result: RecognitionResult): string {
  return resultView(result)
    .map((line) => line.text)
    .join("\n");
}

export function pngDataUrl(base64: string): string {
  return `data:image/png;base64,${base64}`;
}
