import numpy as np
import pytest

from brahmi_ocr.imagecore import GrayImage
from brahmi_ocr.preprocess import (
    EmptyHistogram,
    EvenKernel,
    Histogram,
    PreprocessConfig,
    binarize,
    compute_histogram,
    median_blur,
    otsu_threshold,
    preprocess,
)


def median_blur_oracle(pixels: np.ndarray, kernel: int) -> np.ndarray:
    """Naive sort-the-window median with edge replication."""
    r = kernel // 2
    h, w = pixels.shape
    out = np.empty_like(pixels)
    for y in range(h):
        for x in range(w):
            window = []
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    yy = min(max(y + dy, 0), h - 1)
                    xx = min(max(x + dx, 0), w - 1)
                    window.append(pixels[yy, xx])
            window.sort()
            out[y, x] = window[len(window) // 2]
    return out


def otsu_oracle(bins) -> tuple[int, float]:
    """Evaluate the within-class variance at every threshold directly."""
    best_t, best_var = 0, float("inf")
    total = sum(bins)
    for t in range(256):
        sigma = 0.0
        for lo, hi in ((0, t + 1), (t + 1, 256)):
            n = sum(bins[v] for v in range(lo, hi))
            if n == 0:
                continue
            mu = sum(v * bins[v] for v in range(lo, hi)) / n
            var = sum(bins[v] * (v - mu) ** 2 for v in range(lo, hi)) / n
            sigma += (n / total) * var
        if sigma < best_var:
            best_t, best_var = t, sigma
    return best_t, best_var


def between_class_argmax(bins) -> int:
    """Threshold maximizing w1*w2*(mu1-mu2)^2, smallest-T tie-break."""
    total = sum(bins)
    best_t, best = 0, -1.0
    for t in range(256):
        n1 = sum(bins[: t + 1])
        n2 = total - n1
        if n1 == 0 or n2 == 0:
            score = 0.0
        else:
            mu1 = sum(v * bins[v] for v in range(t + 1)) / n1
            mu2 = sum(v * bins[v] for v in range(t + 1, 256)) / n2
            score = (n1 / total) * (n2 / total) * (mu1 - mu2) ** 2
        if score > best:
            best_t, best = t, score
    return best_t


def random_histogram(rng) -> Histogram:
    img = GrayImage(rng.integers(0, 256, size=(32, 32), dtype=np.uint8))
    return compute_histogram(img)


class TestMedianBlur:
    def test_constant_image_is_fixed_point(self):
        img = GrayImage(np.full((7, 9), 200, dtype=np.uint8))
        np.testing.assert_array_equal(median_blur(img, 3).pixels, img.pixels)

    def test_single_speck_removed(self):
        arr = np.zeros((5, 5), dtype=np.uint8)
        arr[2, 2] = 255
        out = median_blur(GrayImage(arr), 3)
        assert not out.pixels.any()

    def test_kernel_1_is_identity(self):
        rng = np.random.default_rng(0)
        img = GrayImage(rng.integers(0, 256, size=(6, 6), dtype=np.uint8))
        np.testing.assert_array_equal(median_blur(img, 1).pixels, img.pixels)

    @pytest.mark.parametrize("kernel", [3, 5])
    def test_matches_window_sort_oracle(self, kernel):
        rng = np.random.default_rng(123)
        for _ in range(100):
            img = GrayImage(rng.integers(0, 256, size=(9, 9), dtype=np.uint8))
            expected = median_blur_oracle(img.pixels, kernel)
            np.testing.assert_array_equal(median_blur(img, kernel).pixels, expected)

    def test_even_or_nonpositive_kernel_rejected(self):
        img = GrayImage(np.zeros((4, 4), dtype=np.uint8))
        for k in (0, 2, 4, -3):
            with pytest.raises(EvenKernel):
                median_blur(img, k)

    def test_isolated_corruption_in_flat_patch_restored(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            h, w = rng.integers(7, 20, size=2)
            arr = rng.integers(0, 256, size=(h, w), dtype=np.uint8)
            y = int(rng.integers(2, h - 2))
            x = int(rng.integers(2, w - 2))
            v = int(rng.integers(0, 256))
            arr[y - 1 : y + 2, x - 1 : x + 2] = v
            noise = int(rng.integers(0, 256))
            arr[y, x] = noise
            out = median_blur(GrayImage(arr), 3)
            assert out.pixels[y, x] == v


class TestHistogram:
    def test_two_pixel_spike(self):
        hist = compute_histogram(GrayImage.from_flat(2, 1, [5, 5]))
        assert hist.bins[5] == 2
        assert hist.bins.sum() == hist.total == 2

    def test_single_pixel(self):
        hist = compute_histogram(GrayImage.from_flat(1, 1, [0]))
        assert hist.bins[0] == 1 and hist.total == 1

    def test_matches_counting_oracle(self):
        rng = np.random.default_rng(5)
        img = GrayImage(rng.integers(0, 256, size=(32, 32), dtype=np.uint8))
        hist = compute_histogram(img)
        assert hist.total == 1024
        for v in range(256):
            assert hist.bins[v] == int((img.pixels == v).sum())


class TestOtsu:
    def test_two_pure_classes(self):
        bins = np.zeros(256, dtype=np.int64)
        bins[0] = bins[255] = 512
        res = otsu_threshold(Histogram(bins=bins, total=1024))
        assert res.threshold == 0
        assert res.within_class_variance == 0.0

    def test_constant_image(self):
        bins = np.zeros(256, dtype=np.int64)
        bins[93] = 77
        res = otsu_threshold(Histogram(bins=bins, total=77))
        assert res.threshold == 0
        assert res.within_class_variance == 0.0

    def test_empty_histogram_rejected(self):
        with pytest.raises(EmptyHistogram):
            otsu_threshold(Histogram(bins=np.zeros(256, dtype=np.int64), total=0))

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            res = otsu_threshold(random_histogram(rng))
            assert abs(sum(res.class_weights) - 1.0) < 1e-9

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(99)
        for _ in range(50):
            hist = random_histogram(rng)
            res = otsu_threshold(hist)
            t, var = otsu_oracle(hist.bins.tolist())
            assert res.threshold == t
            assert res.within_class_variance == pytest.approx(var, rel=1e-9, abs=1e-12)

    def test_agrees_with_between_class_maximization(self):
        rng = np.random.default_rng(31)
        for _ in range(30):
            hist = random_histogram(rng)
            assert otsu_threshold(hist).threshold == between_class_argmax(hist.bins.tolist())


class TestBinarize:
    def test_ink_dark_splits_at_threshold(self):
        img = GrayImage.from_flat(2, 1, [10, 240])
        out = binarize(img, 128, "ink_dark")
        assert out.pixels.flatten().tolist() == [True, False]

    def test_all_above_threshold_is_background(self):
        img = GrayImage(np.full((3, 3), 200, dtype=np.uint8))
        assert not binarize(img, 100, "ink_dark").pixels.any()

    def test_auto_keeps_minority(self):
        arr = np.full((3, 3), 230, dtype=np.uint8)
        arr[0, 0] = arr[0, 1] = 20
        out = binarize(GrayImage(arr), 128, "auto")
        assert out.foreground_count == 2
        # flipped gray levels: dark is now the majority
        out = binarize(GrayImage(255 - arr), 128, "auto")
        assert out.foreground_count == 2

    def test_auto_never_exceeds_half_coverage(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            img = GrayImage(rng.integers(0, 256, size=(9, 9), dtype=np.uint8))
            t = int(rng.integers(0, 256))
            out = binarize(img, t, "auto")
            assert out.foreground_count * 2 <= out.pixels.size

    def test_auto_on_constant_image_flips_to_empty(self):
        img = GrayImage(np.full((4, 4), 7, dtype=np.uint8))
        assert binarize(img, 200, "auto").foreground_count == 0


class TestPreprocess:
    def test_constant_image_all_background(self):
        img = GrayImage(np.full((10, 10), 140, dtype=np.uint8))
        binary, _ = preprocess(img, PreprocessConfig())
        assert not binary.pixels.any()

    def test_threshold_override_ignores_histogram(self):
        rng = np.random.default_rng(2)
        img = GrayImage(rng.integers(0, 256, size=(12, 12), dtype=np.uint8))
        cfg = PreprocessConfig(median_kernel=1, polarity="ink_dark", threshold_override=128)
        binary, _ = preprocess(img, cfg)
        np.testing.assert_array_equal(binary.pixels, img.pixels <= 128)

    def test_salt_and_pepper_is_invisible_after_preprocess(self):
        rng = np.random.default_rng(77)
        clean = np.full((40, 40), 220, dtype=np.uint8)
        clean[10:28, 8:30] = 30  # rectangular glyph
        # corrupt ~2% of pixels at sites whose 3x3 window is flat in the
        # clean image, no two sites sharing a window
        noisy = clean.copy()
        taken: list[tuple[int, int]] = []
        while len(taken) < 32:
            y, x = (int(v) for v in rng.integers(2, 38, size=2))
            patch = clean[y - 2 : y + 3, x - 2 : x + 3]
            if patch.min() != patch.max():
                continue
            if any(max(abs(y - py), abs(x - px)) < 3 for py, px in taken):
                continue
            noisy[y, x] = 255 if rng.random() < 0.5 else 0
            taken.append((y, x))
        cfg = PreprocessConfig(median_kernel=3)
        clean_binary, clean_otsu = preprocess(GrayImage(clean), cfg)
        noisy_binary, noisy_otsu = preprocess(GrayImage(noisy), cfg)
        np.testing.assert_array_equal(noisy_binary.pixels, clean_binary.pixels)
        assert noisy_otsu.threshold == clean_otsu.threshold

    def test_config_validation(self):
        with pytest.raises(EvenKernel):
            PreprocessConfig(median_kernel=4)
        with pytest.raises(ValueError):
            PreprocessConfig(polarity="up")
        with pytest.raises(ValueError):
            PreprocessConfig(threshold_override=300)
