// Session state and client-side validation. The rules here mirror the
// server's exactly so no control can submit a value the service would 422.

import type {
  PreprocessParams,
  PreprocessPreview,
  RecognitionResult,
  SegmentPreview,
  SegmentationParams,
} from "./api.js";

// Even kernel sizes are invalid server-side, so they are never offered.
export const MEDIAN_KERNEL_CHOICES = [1, 3, 5, 7, 9] as const;

export const POLARITY_CHOICES = ["auto", "ink_dark", "ink_light"] as const;

export interface ParamsSnapshot {
  preprocess: PreprocessParams;
  segmentation: SegmentationParams;
  topK: number;
}

export interface SessionState {
  token: string | null;
  file: File | null;
  params: ParamsSnapshot;
  history: ParamsSnapshot[]; // previous snapshots, oldest first
  preprocessPreview: PreprocessPreview | null;
  segmentPreview: SegmentPreview | null;
  result: RecognitionResult | null;
}

export function defaultParams(): ParamsSnapshot {
  return {
    preprocess: { medianKernel: 3, polarity: "auto", thresholdOverride: null },
    segmentation: { noiseFloor: 0, minBand: 3, minGap: 2, minInk: 5 },
    topK: 3,
  };
}

export function initialState(): SessionState {
  return {
    token: null,
    file: null,
    params: defaultParams(),
    history: [],
    preprocessPreview: null,
    segmentPreview: null,
    result: null,
  };
}

function isInt(value: number): boolean {
  return Number.isInteger(value);
}

// Returns the offending field name, or null when the params are valid.
export function validatePreprocess(params: PreprocessParams): string | null {
  const k = params.medianKernel;
  if (!isInt(k) || k < 1 || k % 2 === 0) return "median_kernel";
  if (!(POLARITY_CHOICES as readonly string[]).includes(params.polarity)) {
    return "polarity";
  }
  const t = params.thresholdOverride;
  if (t !== null && (!isInt(t) || t < 0 || t > 255)) return "threshold_override";
  return null;
}

export function validateSegmentation(params: SegmentationParams): string | null {
  if (!isInt(params.noiseFloor) || params.noiseFloor < 0) return "noise_floor";
  if (!isInt(params.minBand) || params.minBand < 1) return "min_band";
  if (!isInt(params.minGap) || params.minGap < 1) return "min_gap";
  if (!isInt(params.minInk) || params.minInk < 1) return "min_ink";
  return null;
}

export function validateParams(params: ParamsSnapshot): string | null {
  const bad = validatePreprocess(params.preprocess);
  if (bad !== null) return bad;
  const badSeg = validateSegmentation(params.segmentation);
  if (badSeg !== null) return badSeg;
  if (!isInt(params.topK) || params.topK < 1) return "top_k";
  return null;
}

export function canRecognize(state: SessionState): boolean {
  return (state.token !== null || state.file !== null) &&
    validateParams(state.params) === null;
}

function cloneParams(params: ParamsSnapshot): ParamsSnapshot {
  return {
    preprocess: { ...params.preprocess },
    segmentation: { ...params.segmentation },
    topK: params.topK,
  };
}

export interface ParamsPatch {
  preprocess?: Partial<PreprocessParams>;
  segmentation?: Partial<SegmentationParams>;
  topK?: number;
}

// Applies a patch, pushing the previous snapshot onto the undo history.
// Invalid patches are rejected untouched so state never holds bad params.
export function applyParams(state: SessionState, patch: ParamsPatch): SessionState {
  const next: ParamsSnapshot = {
    preprocess: { ...state.params.preprocess, ...patch.preprocess },
    segmentation: { ...state.params.segmentation, ...patch.segmentation },
    topK: patch.topK ?? state.params.topK,
  };
  if (validateParams(next) !== null) return state;
  return {
    ...state,
    params: next,
    history: [...state.history, cloneParams(state.params)],
  };
}

export function undoParams(state: SessionState): SessionState {
  if (state.history.length === 0) return state;
  const history = state.history.slice(0, -1);
  return { ...state, params: state.history[state.history.length - 1], history };
}

export function uploadAccepted(state: SessionState, file: File): SessionState {
  // A new image invalidates previews, results, and any server-side token.
  return {
    ...state,
    file,
    token: null,
    preprocessPreview: null,
    segmentPreview: null,
    result: null,
  };
}
