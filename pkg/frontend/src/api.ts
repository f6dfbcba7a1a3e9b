// Typed client for the recognition service. Wire shapes mirror the JSON the
// service emits, snake_case keys included, so every displayed value traces
// straight back to a response field.

export interface Interval {
  start: number;
  end: number;
}

export interface OtsuStats {
  threshold: number; // 0-255
  within_class_variance: number;
  class_weights: [number, number];
  class_means: [number, number];
}

export interface PreprocessParams {
  medianKernel: number; // odd, >= 1
  polarity: "auto" | "ink_dark" | "ink_light";
  thresholdOverride: number | null; // null = use Otsu
}

export interface SegmentationParams {
  noiseFloor: number; // >= 0
  minBand: number; // >= 1
  minGap: number; // >= 1
  minInk: number; // >= 1
}

export interface ManifestBox {
  line_index: number;
  cols: Interval;
  rows: Interval;
  ink_pixels: number;
}

export interface ManifestLine {
  rows: Interval;
  characters: ManifestBox[];
}

export interface SegmentManifest {
  lines: ManifestLine[];
}

export interface PreprocessPreview {
  stage: "preprocess";
  token: string;
  otsu: OtsuStats;
  params: { preprocess: Record<string, unknown> };
  image_png: string; // base64 PNG of the binarized page
}

export interface SegmentPreview {
  stage: "segment";
  token: string;
  manifest: SegmentManifest;
  overlay_png: string | null;
  params: {
    preprocess: Record<string, unknown>;
    segmentation: Record<string, unknown>;
  };
}

export interface TopPrediction {
  label: string;
  probability: number; // (0, 1]
}

export interface RecognizedCharacter {
  line_index: number;
  cols: Interval;
  rows: Interval;
  ink_pixels: number;
  glyph: string[];
  top_k: TopPrediction[];
}

export interface RecognizedLine {
  rows: Interval;
  characters: RecognizedCharacter[];
}

export interface RecognitionResult {
  model_id: string;
  page: { height: number; width: number };
  params: Record<string, unknown>;
  lines: RecognizedLine[];
}

// The page either re-sends an uploaded file or replays a server-side token.
export type ImageSource = { file: File } | { token: string };

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;
  readonly field: string | null;

  constructor(status: number, message: string, field: string | null = null) {
    super(message);
    this.status = status;
    this.field = field;
  }
}

function appendImage(form: FormData, source: ImageSource): void {
  if ("file" in source) {
    form.append("image", source.file);
  } else {
    form.append("token", source.token);
  }
}

function appendPreprocess(form: FormData, params: PreprocessParams): void {
  form.append("median_kernel", String(params.medianKernel));
  form.append("polarity", params.polarity);
  if (params.thresholdOverride !== null) {
    form.append("threshold_override", String(params.thresholdOverride));
  }
}

function appendSegmentation(form: FormData, params: SegmentationParams): void {
  form.append("noise_floor", String(params.noiseFloor));
  form.append("min_band", String(params.minBand));
  form.append("min_gap", String(params.minGap));
  form.append("min_ink", String(params.minInk));
}

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let message = `request failed with status ${response.status}`;
  let field: string | null = null;
  try {
    const body = (await response.json()) as { error?: string; field?: string };
    if (body.error) message = body.error;
    if (body.field) field = body.field;
  } catch {
    // non-JSON error body; keep the status message
  }
  throw new ApiError(response.status, message, field);
}

export class RecognitionApi {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl: FetchLike = fetch) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl;
  }

  private async postForm<T>(path: string, form: FormData): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      body: form,
    });
    await raiseForStatus(response);
    return (await response.json()) as T;
  }

  async health(): Promise<{ status: string }> {
    const response = await this.fetchImpl(this.baseUrl + "/api/health");
    await raiseForStatus(response);
    return (await response.json()) as { status: string };
  }

  async labels(): Promise<{ labels: string[]; model_id: string }> {
    const response = await this.fetchImpl(this.baseUrl + "/api/labels");
    await raiseForStatus(response);
    return (await response.json()) as { labels: string[]; model_id: string };
  }

  async previewPreprocess(
    source: ImageSource,
    params: PreprocessParams,
  ): Promise<PreprocessPreview> {
    const form = new FormData();
    appendImage(form, source);
    form.append("stage", "preprocess");
    appendPreprocess(form, params);
    return this.postForm<PreprocessPreview>("/api/preview", form);
  }

  async previewSegment(
    source: ImageSource,
    preprocess: PreprocessParams,
    segmentation: SegmentationParams,
    overlay = false,
  ): Promise<SegmentPreview> {
    const form = new FormData();
    appendImage(form, source);
    form.append("stage", "segment");
    appendPreprocess(form, preprocess);
    appendSegmentation(form, segmentation);
    if (overlay) form.append("overlay", "1");
    return this.postForm<SegmentPreview>("/api/preview", form);
  }

  async recognize(
    source: ImageSource,
    preprocess: PreprocessParams,
    segmentation: SegmentationParams,
    topK: number,
  ): Promise<RecognitionResult> {
    const form = new FormData();
    appendImage(form, source);
    appendPreprocess(form, preprocess);
    appendSegmentation(form, segmentation);
    form.append("top_k", String(topK));
    return this.postForm<RecognitionResult>("/api/recognize", form);
  }
}
