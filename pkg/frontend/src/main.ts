// Page wiring: uploads, parameter controls, debounced previews, recognition.
// All rendering goes through the pure helpers in render.ts; this module only
// moves values between the DOM, the session state, and the API client.

import { ApiError, RecognitionApi } from "./api.js";
import type { ImageSource } from "./api.js";
import { PREVIEW_DEBOUNCE_MS, RequestSequencer, debounce } from "./debounce.js";
import { drawOverlay, manifestRects } from "./overlay.js";
import {
  copyableText,
  formatBoxCounts,
  formatThreshold,
  formatVariance,
  pngDataUrl,
  resultView,
} from "./render.js";
import {
  MEDIAN_KERNEL_CHOICES,
  POLARITY_CHOICES,
  applyParams,
  canRecognize,
  initialState,
  undoParams,
  uploadAccepted,
} from "./state.js";
import type { ParamsPatch, SessionState } from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function imageSource(state: SessionState): ImageSource | null {
  if (state.token !== null) return { token: state.token };
  if (state.file !== null) return { file: state.file };
  return null;
}

export function startApp(): void {
  const api = new RecognitionApi("");
  let state = initialState();

  const uploadInput = el<HTMLInputElement>("upload-input");
  const scanInput = el<HTMLInputElement>("scan-input");
  const kernelSelect = el<HTMLSelectElement>("median-kernel");
  const polaritySelect = el<HTMLSelectElement>("polarity");
  const overrideInput = el<HTMLInputElement>("threshold-override");
  const noiseFloorInput = el<HTMLInputElement>("noise-floor");
  const minBandInput = el<HTMLInputElement>("min-band");
  const minGapInput = el<HTMLInputElement>("min-gap");
  const minInkInput = el<HTMLInputElement>("min-ink");
  const topKInput = el<HTMLInputElement>("top-k");
  const undoButton = el<HTMLButtonElement>("undo");
  const recognizeButton = el<HTMLButtonElement>("recognize");
  const copyButton = el<HTMLButtonElement>("copy-text");
  const statusLine = el<HTMLElement>("status");
  const thresholdOut = el<HTMLElement>("threshold-out");
  const binarizedImg = el<HTMLImageElement>("binarized");
  const segmentImg = el<HTMLImageElement>("segmented");
  const overlayCanvas = el<HTMLCanvasElement>("overlay");
  const boxCountsOut = el<HTMLElement>("box-counts");
  const resultPanel = el<HTMLElement>("result-panel");

  for (const k of MEDIAN_KERNEL_CHOICES) {
    const option = document.createElement("option");
    option.value = String(k);
    option.textContent = String(k);
    if (k === state.params.preprocess.medianKernel) option.selected = true;
    kernelSelect.appendChild(option);
  }
  for (const p of POLARITY_CHOICES) {
    const option = document.createElement("option");
    option.value = p;
    option.textContent = p;
    polaritySelect.appendChild(option);
  }

  const preprocessSeq = new RequestSequencer();
  const segmentSeq = new RequestSequencer();

  function clearFieldErrors(): void {
    for (const node of document.querySelectorAll(".field-error")) {
      node.classList.remove("field-error");
    }
    statusLine.textContent = "";
  }

  function showError(err: unknown): void {
    if (err instanceof ApiError) {
      statusLine.textContent = err.field
        ? `${err.message} (${err.field})`
        : err.message;
      if (err.field) {
        const control = document.querySelector(`[data-field="${err.field}"]`);
        control?.classList.add("field-error");
      }
    } else {
      statusLine.textContent = String(err);
    }
  }

  async function refreshPreprocess(): Promise<void> {
    const source = imageSource(state);
    if (!source) return;
    const requestNumber = preprocessSeq.issue();
    try {
      const preview = await api.previewPreprocess(source, state.params.preprocess);
      if (!preprocessSeq.isCurrent(requestNumber)) return;
      state = { ...state, token: preview.token, preprocessPreview: preview };
      thresholdOut.textContent = `${formatThreshold(preview)} | ${formatVariance(preview)}`;
      binarizedImg.src = pngDataUrl(preview.image_png);
      void refreshSegment();
    } catch (err) {
      if (preprocessSeq.isCurrent(requestNumber)) showError(err);
    }
  }

  function redrawOverlay(): void {
    const preview = state.segmentPreview;
    if (!preview || segmentImg.naturalWidth === 0) return;
    overlayCanvas.width = segmentImg.naturalWidth;
    overlayCanvas.height = segmentImg.naturalHeight;
    const ctx = overlayCanvas.getContext("2d");
    if (ctx) {
      drawOverlay(
        ctx,
        manifestRects(preview.manifest, segmentImg.naturalWidth),
        overlayCanvas.width,
        overlayCanvas.height,
      );
    }
  }

  segmentImg.addEventListener("load", redrawOverlay);

  async function refreshSegment(): Promise<void> {
    const source = imageSource(state);
    if (!source) return;
    const requestNumber = segmentSeq.issue();
    try {
      const preview = await api.previewSegment(
        source,
        state.params.preprocess,
        state.params.segmentation,
      );
      if (!segmentSeq.isCurrent(requestNumber)) return;
      state = { ...state, token: preview.token, segmentPreview: preview };
      boxCountsOut.textContent = formatBoxCounts(preview);
      if (state.preprocessPreview) {
        // Boxes are drawn client-side over the binarized page.
        segmentImg.src = pngDataUrl(state.preprocessPreview.image_png);
      }
      redrawOverlay();
    } catch (err) {
      if (segmentSeq.isCurrent(requestNumber)) showError(err);
    }
  }

  const debouncedPreview = debounce(() => {
    void refreshPreprocess();
  }, PREVIEW_DEBOUNCE_MS);

  function updateParams(patch: ParamsPatch): void {
    clearFieldErrors();
    state = applyParams(state, patch);
    recognizeButton.disabled = !canRecognize(state);
    debouncedPreview();
  }

  function acceptUpload(files: FileList | null): void {
    if (!files || files.length === 0) return;
    clearFieldErrors();
    state = uploadAccepted(state, files[0]);
    recognizeButton.disabled = !canRecognize(state);
    void refreshPreprocess();
  }

  uploadInput.addEventListener("change", () => acceptUpload(uploadInput.files));
  scanInput.addEventListener("change", () => acceptUpload(scanInput.files));

  kernelSelect.addEventListener("change", () => {
    updateParams({ preprocess: { medianKernel: Number(kernelSelect.value) } });
  });
  polaritySelect.addEventListener("change", () => {
    updateParams({
      preprocess: {
        polarity: polaritySelect.value as "auto" | "ink_dark" | "ink_light",
      },
    });
  });
  overrideInput.addEventListener("change", () => {
    const raw = overrideInput.value.trim();
    updateParams({
      preprocess: { thresholdOverride: raw === "" ? null : Number(raw) },
    });
  });
  noiseFloorInput.addEventListener("input", () => {
    updateParams({ segmentation: { noiseFloor: Number(noiseFloorInput.value) } });
  });
  minBandInput.addEventListener("input", () => {
    updateParams({ segmentation: { minBand: Number(minBandInput.value) } });
  });
  minGapInput.addEventListener("input", () => {
    updateParams({ segmentation: { minGap: Number(minGapInput.value) } });
  });
  minInkInput.addEventListener("input", () => {
    updateParams({ segmentation: { minInk: Number(minInkInput.value) } });
  });
  topKInput.addEventListener("change", () => {
    updateParams({ topK: Number(topKInput.value) });
  });

  undoButton.addEventListener("click", () => {
    clearFieldErrors();
    state = undoParams(state);
    kernelSelect.value = String(state.params.preprocess.medianKernel);
    polaritySelect.value = state.params.preprocess.polarity;
    overrideInput.value =
      state.params.preprocess.thresholdOverride === null
        ? ""
        : String(state.params.preprocess.thresholdOverride);
    noiseFloorInput.value = String(state.params.segmentation.noiseFloor);
    minBandInput.value = String(state.params.segmentation.minBand);
    minGapInput.value = String(state.params.segmentation.minGap);
    minInkInput.value = String(state.params.segmentation.minInk);
    topKInput.value = String(state.params.topK);
    debouncedPreview();
  });

  recognizeButton.addEventListener("click", async () => {
    const source = imageSource(state);
    if (!source) return;
    clearFieldErrors();
    recognizeButton.disabled = true;
    try {
      const result = await api.recognize(
        source,
        state.params.preprocess,
        state.params.segmentation,
        state.params.topK,
      );
      state = { ...state, result };
      resultPanel.replaceChildren();
      for (const line of resultView(result)) {
        const heading = document.createElement("p");
        heading.className = "line-text";
        heading.textContent = line.text;
        resultPanel.appendChild(heading);
        const list = document.createElement("ul");
        for (const predictions of line.characters) {
          const item = document.createElement("li");
          item.textContent = predictions
            .map((p) => `${p.label} ${p.percent}`)
            .join("  ");
          list.appendChild(item);
        }
        resultPanel.appendChild(list);
      }
    } catch (err) {
      showError(err);
    } finally {
      recognizeButton.disabled = !canRecognize(state);
    }
  });

  copyButton.addEventListener("click", () => {
    if (state.result) void navigator.clipboard.writeText(copyableText(state.result));
  });

  void api
    .health()
    .then(() => {
      statusLine.textContent = "";
    })
    .catch(() => {
      statusLine.textContent = "service unreachable";
    });
}

if (typeof document !== "undefined" && document.getElementById("upload-input")) {
  startApp();
}
