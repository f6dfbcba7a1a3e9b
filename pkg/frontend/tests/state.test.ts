import { describe, expect, it } from "vitest";

import {
  MEDIAN_KERNEL_CHOICES,
  applyParams,
  canRecognize,
  defaultParams,
  initialState,
  undoParams,
  uploadAccepted,
  validateParams,
  validatePreprocess,
  validateSegmentation,
} from "../src/state.js";

describe("parameter validation mirrors the server rules", () => {
  it("accepts the defaults", () => {
    expect(validateParams(defaultParams())).toBeNull();
  });

  it("offers only odd median kernels", () => {
    for (const k of MEDIAN_KERNEL_CHOICES) {
      expect(k % 2).toBe(1);
      expect(
        validatePreprocess({ medianKernel: k, polarity: "auto", thresholdOverride: null }),
      ).toBeNull();
    }
  });

  it.each([0, 2, 4, -1, 3.5])("rejects kernel %p", (k) => {
    expect(
      validatePreprocess({ medianKernel: k as number, polarity: "auto", thresholdOverride: null }),
    ).toBe("median_kernel");
  });

  it("bounds the threshold override to [0, 255]", () => {
    const base = { medianKernel: 3, polarity: "auto" as const };
    expect(validatePreprocess({ ...base, thresholdOverride: 0 })).toBeNull();
    expect(validatePreprocess({ ...base, thresholdOverride: 255 })).toBeNull();
    expect(validatePreprocess({ ...base, thresholdOverride: 256 })).toBe("threshold_override");
    expect(validatePreprocess({ ...base, thresholdOverride: -1 })).toBe("threshold_override");
    expect(validatePreprocess({ ...base, thresholdOverride: null })).toBeNull();
  });

  it("names the first offending segmentation field", () => {
    const good = defaultParams().segmentation;
    expect(validateSegmentation({ ...good, noiseFloor: -1 })).toBe("noise_floor");
    expect(validateSegmentation({ ...good, minBand: 0 })).toBe("min_band");
    expect(validateSegmentation({ ...good, minGap: 0 })).toBe("min_gap");
    expect(validateSegmentation({ ...good, minInk: 0 })).toBe("min_ink");
  });

  it("rejects a non-positive top_k", () => {
    const params = { ...defaultParams(), topK: 0 };
    expect(validateParams(params)).toBe("top_k");
  });
});

describe("session state", () => {
  it("cannot recognize before an image arrives", () => {
    expect(canRecognize(initialState())).toBe(false);
  });

  it("can recognize once a file is accepted", () => {
    const file = new File([new Uint8Array([1, 2, 3])], "page.png");
    const state = uploadAccepted(initialState(), file);
    expect(canRecognize(state)).toBe(true);
  });

  it("a new upload clears previews, result, and token", () => {
    const file = new File([new Uint8Array([1])], "a.png");
    const dirty = {
      ...initialState(),
      token: "tok",
      result: {} as never,
    };
    const state = uploadAccepted(dirty, file);
    expect(state.token).toBeNull();
    expect(state.result).toBeNull();
    expect(state.file).toBe(file);
  });

  it("rejects patches that would violate server rules", () => {
    const state = initialState();
    const next = applyParams(state, { preprocess: { medianKernel: 4 } });
    expect(next).toBe(state);
    expect(next.history).toHaveLength(0);
  });

  it("undo walks the parameter history", () => {
    let state = initialState();
    state = applyParams(state, { preprocess: { medianKernel: 5 } });
    state = applyParams(state, { segmentation: { minGap: 4 } });
    expect(state.params.preprocess.medianKernel).toBe(5);
    expect(state.params.segmentation.minGap).toBe(4);

    state = undoParams(state);
    expect(state.params.preprocess.medianKernel).toBe(5);
    expect(state.params.segmentation.minGap).toBe(2);

    state = undoParams(state);
    expect(state.params.preprocess.medianKernel).toBe(3);

    const settled = undoParams(state);
    expect(settled.params).toEqual(defaultParams());
  });
});
