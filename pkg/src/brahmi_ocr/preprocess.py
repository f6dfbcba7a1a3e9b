"""Noise removal and binarization: median blur followed by Otsu thresholding.

The threshold search minimizes the within-class variance over the two
intensity classes C1 = [0..T] and C2 = [T+1..255]. All 256 candidate
thresholds are evaluated; ties break toward the smallest T and an empty
class contributes zero variance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .imagecore import BinaryImage, GrayImage

POLARITIES = ("auto", "ink_dark", "ink_light")


class EvenKernel(ValueError):
    """Median kernel must be an odd integer >= 1."""


class EmptyImage(ValueError):
    pass


class EmptyHistogram(ValueError):
    pass


@dataclass(frozen=True)
class Histogram:
    """256 intensity bins; ``total`` equals the source pixel count."""

    bins: np.ndarray
    total: int

    def __post_init__(self) -> None:
        arr = np.asarray(self.bins, dtype=np.int64)
        if arr.shape != (256,):
            raise ValueError(f"histogram needs 256 bins, got shape {arr.shape}")
        if (arr < 0).any():
            raise ValueError("bin counts must be non-negative")
        if int(arr.sum()) != self.total:
            raise ValueError("total must equal the sum of bins")
        arr.flags.writeable = False
        object.__setattr__(self, "bins", arr)


@dataclass(frozen=True)
class OtsuResult:
    threshold: int
    within_class_variance: float
    class_weights: tuple[float, float]
    class_means: tuple[float, float]


@dataclass(frozen=True)
class PreprocessConfig:
    median_kernel: int = 3
    polarity: str = "auto"
    threshold_override: int | None = None

    def __post_init__(self) -> None:
        if self.median_kernel < 1 or self.median_kernel % 2 == 0:
            raise EvenKernel(f"median_kernel must be odd and >= 1, got {self.median_kernel}")
        if self.polarity not in POLARITIES:
            raise ValueError(f"polarity must be one of {POLARITIES}, got {self.polarity!r}")
        if self.threshold_override is not None and not 0 <= self.threshold_override <= 255:
            raise ValueError(f"threshold_override must lie in [0, 255], got {self.threshold_override}")


def median_blur(img: GrayImage, kernel: int) -> GrayImage:
    """Replace each pixel with the exact median of its kernel x kernel window.

    Borders are edge-replicated so the output keeps the input dimensions;
    kernel 1 is the identity.
    """
    if kernel < 1 or kernel % 2 == 0:
        raise EvenKernel(f"kernel must be odd and >= 1, got {kernel}")
    if kernel == 1:
        return img
    r = kernel // 2
    padded = np.pad(img.pixels, r, mode="edge")
    out = np.empty_like(img.pixels)
    # chunk rows so the window view never materializes more than ~8 MB
    chunk = max(1, (1 << 23) // (kernel * kernel * img.width))
    for y0 in range(0, img.height, chunk):
        y1 = min(y0 + chunk, img.height)
        windows = np.lib.stride_tricks.sliding_window_view(
            padded[y0 : y1 + 2 * r], (kernel, kernel)
        )
        out[y0:y1] = np.median(windows, axis=(2, 3)).astype(np.uint8)
    return GrayImage(out)


def compute_histogram(img: GrayImage) -> Histogram:
    if img.pixels.size == 0:
        raise EmptyImage("cannot histogram an empty image")
    bins = np.bincount(img.pixels.ravel(), minlength=256).astype(np.int64)
    return Histogram(bins=bins, total=int(bins.sum()))


def otsu_threshold(hist: Histogram) -> OtsuResult:
    """Smallest T in [0, 255] minimizing the within-class variance.

    Candidate variances are compared in exact rational arithmetic: every
    empty bin ties two adjacent thresholds exactly, and float rounding
    would pick an arbitrary member of the tied set instead of the smallest.
    """
    if hist.total < 1:
        raise EmptyHistogram("histogram has no pixels")
    values = np.arange(256, dtype=np.int64)
    n1 = np.cumsum(hist.bins)
    s1 = np.cumsum(hist.bins * values)
    q1 = np.cumsum(hist.bins * values * values)
    n, s, q = int(hist.total), int(s1[-1]), int(q1[-1])
    best_t = 0
    best: Fraction | None = None
    for t in range(256):
        c1 = int(n1[t])
        c2 = n - c1
        # n * sigma_w^2 = sum over both classes of (sum v^2 - (sum v)^2 / count)
        a = Fraction(0)
        if c1:
            a += Fraction(int(q1[t])) - Fraction(int(s1[t]) ** 2, c1)
        if c2:
            a += Fraction(q - int(q1[t])) - Fraction((s - int(s1[t])) ** 2, c2)
        if best is None or a < best:
            best, best_t = a, t
    c1 = int(n1[best_t])
    c2 = n - c1
    lo_sum = int(s1[best_t])
    return OtsuResult(
        threshold=best_t,
        within_class_variance=float(best / n),
        class_weights=(c1 / n, c2 / n),
        class_means=(lo_sum / c1 if c1 else 0.0, (s - lo_sum) / c2 if c2 else 0.0),
    )


def binarize(img: GrayImage, threshold: int, polarity: str = "auto") -> BinaryImage:
    """Split pixels at the threshold; ``auto`` keeps the minority class as ink."""
    if not 0 <= threshold <= 255:
        raise ValueError(f"threshold must lie in [0, 255], got {threshold}")
    if polarity not in POLARITIES:
        raise ValueError(f"polarity must be one of {POLARITIES}, got {polarity!r}")
    dark = img.pixels <= threshold
    if polarity == "ink_dark":
        return BinaryImage(dark)
    if polarity == "ink_light":
        return BinaryImage(~dark)
    if dark.sum() * 2 > dark.size:
        return BinaryImage(~dark)
    return BinaryImage(dark)


def preprocess(img: GrayImage, cfg: PreprocessConfig | None = None) -> tuple[BinaryImage, OtsuResult]:
    """Median blur, then Otsu (unless overridden), then binarize."""
    cfg = cfg or PreprocessConfig()
    blurred = median_blur(img, cfg.median_kernel)
    otsu = otsu_threshold(compute_histogram(blurred))
    threshold = cfg.threshold_override if cfg.threshold_override is not None else otsu.threshold
    return binarize(blurred, threshold, cfg.polarity), otsu
