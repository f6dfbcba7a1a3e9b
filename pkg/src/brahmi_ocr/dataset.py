"""Directory-per-class dataset ingestion, label maps, splits, synthetic corpora.

A dataset is an immutable sequence of (GrayImage, class index) pairs plus
the ordered label map.  Loaders normalize every glyph to one canvas size
using the same tight-crop-and-fit rule the recognizer applies at
inference time, so training and recognition see the same distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import augmentation
from .imagecore import (
    BinaryImage,
    GrayImage,
    RgbImage,
    binary_to_gray,
    decode_image,
    encode_image,
    to_grayscale,
)
from .preprocess import PreprocessConfig, preprocess
from .segmentation import fit_to_canvas

IMAGE_SUFFIXES = (".png", ".pgm")

# Canvas margin shared by loaders and the recognizer's glyph normalizer.
CANVAS_MARGIN = 0.1


class EmptyTree(ValueError):
    """Dataset root (or one of its class directories) holds no images."""


class ClassTooSmall(ValueError):
    """A class has too few samples for the requested stratified split."""


@dataclass(frozen=True)
class LabelMap:
    """Ordered class names; position is the integer label."""

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        names = tuple(self.names)
        if len(set(names)) != len(names):
            raise ValueError("duplicate class names in label map")
        if any(not n for n in names):
            raise ValueError("class names must be non-empty")
        object.__setattr__(self, "names", names)

    def __len__(self) -> int:
        return len(self.names)

    def name_of(self, index: int) -> str:
        return self.names[index]

    def index_of(self, name: str) -> int:
        return self.names.index(name)


@dataclass(frozen=True)
class Dataset:
    """Immutable (image, label index) pairs over a fixed label map."""

    samples: tuple[tuple[GrayImage, int], ...]
    label_map: LabelMap

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(tuple(s) for s in self.samples))
        shape = None
        for img, idx in self.samples:
            if not 0 <= idx < len(self.label_map):
                raise ValueError(f"label index {idx} outside map of {len(self.label_map)}")
            if shape is None:
                shape = img.pixels.shape
            elif img.pixels.shape != shape:
                raise ValueError("all dataset images must share one (height, width)")

    def __len__(self) -> int:
        return len(self.samples)

    def class_counts(self) -> list[int]:
        counts = [0] * len(self.label_map)
        for _, idx in self.samples:
            counts[idx] += 1
        return counts


@dataclass(frozen=True)
class SplitConfig:
    val_fraction: float
    seed: int
    stratified: bool = True

    def __post_init__(self) -> None:
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must lie in (0, 1)")


def condition_glyph(gray: GrayImage, side: int, margin: float = CANVAS_MARGIN) -> GrayImage:
    """Binarize, crop to the tight ink box, and fit onto a side x side canvas.

    This is the loader-side twin of the recognizer's glyph normalization;
    both must keep producing identical canvases for a given crop.
    """
    binary, _ = preprocess(gray, PreprocessConfig())
    ys, xs = np.nonzero(binary.pixels)
    if ys.size == 0:
        raise EmptyTree("image has no foreground ink after binarization")
    crop = BinaryImage(binary.pixels[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1])
    return fit_to_canvas(binary_to_gray(crop).pixels, side, margin)


def load_class_tree(root: str | Path, target_side: int) -> Dataset:
    """Load root/<class>/<image> trees; labels are sorted directory names."""
    root = Path(root)
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir()) if root.is_dir() else []
    if not class_dirs:
        raise EmptyTree(f"no class directories under {root}")
    label_map = LabelMap(tuple(p.name for p in class_dirs))
    samples: list[tuple[GrayImage, int]] = []
    for idx, class_dir in enumerate(class_dirs):
        files = sorted(
            p for p in class_dir.iterdir()
            if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
        )
        if not files:
            raise EmptyTree(f"class directory {class_dir} holds no images")
        for path in files:
            try:
                img = decode_image(path.read_bytes())
                gray = to_grayscale(img) if isinstance(img, RgbImage) else img
                samples.append((condition_glyph(gray, target_side), idx))
            except ValueError as e:
                raise type(e)(f"{path}: {e}") from e
    return Dataset(samples=tuple(samples), label_map=label_map)


def save_class_tree(ds: Dataset, root: str | Path, image_format: str = "png") -> int:
    """Write ds as root/<class>/<index>.<format>; returns files written."""
    root = Path(root)
    digits = max(4, len(str(max(len(ds), 1) - 1)))
    per_class: dict[int, int] = {}
    written = 0
    for img, idx in ds.samples:
        class_dir = root / ds.label_map.name_of(idx)
        class_dir.mkdir(parents=True, exist_ok=True)
        n = per_class.get(idx, 0)
        per_class[idx] = n + 1
        path = class_dir / f"{n:0{digits}d}.{image_format}"
        path.write_bytes(encode_image(img, format=image_format))
        written += 1
    return written


def stratified_split(ds: Dataset, cfg: SplitConfig) -> tuple[Dataset, Dataset]:
    """Split per class (or globally when stratified=False), seeded shuffle.

    Validation takes ceil(val_fraction * n) samples; train and val are
    disjoint and together reproduce the input multiset.
    """
    if cfg.stratified:
        by_class: dict[int, list[int]] = {i: [] for i in range(len(ds.label_map))}
        for pos, (_, idx) in enumerate(ds.samples):
            by_class[idx].append(pos)
        train_pos: list[int] = []
        val_pos: list[int] = []
        for idx in range(len(ds.label_map)):
            positions = by_class[idx]
            if not positions:
                continue
            if len(positions) < 2:
                raise ClassTooSmall(
                    f"class {ds.label_map.name_of(idx)!r} has {len(positions)} sample(s); "
                    "stratified split needs >= 2"
                )
            order = np.random.default_rng([cfg.seed, idx]).permutation(len(positions))
            n_val = math.ceil(cfg.val_fraction * len(positions))
            shuffled = [positions[i] for i in order]
            val_pos.extend(shuffled[:n_val])
            train_pos.extend(shuffled[n_val:])
    else:
        order = np.random.default_rng(cfg.seed).permutation(len(ds.samples))
        n_val = math.ceil(cfg.val_fraction * len(ds.samples))
        val_pos = [int(i) for i in order[:n_val]]
        train_pos = [int(i) for i in order[n_val:]]
    train = Dataset(tuple(ds.samples[i] for i in train_pos), ds.label_map)
    val = Dataset(tuple(ds.samples[i] for i in val_pos), ds.label_map)
    return train, val


# Synthetic corpus: every class shares a connected rectangular frame (so
# projection profiles never split a glyph) and differs by which interior
# grid cells carry a mark.  Class k inks the cells where bit j of (k+1)
# is set, so any two classes differ in at least one cell.  Marks fill
# most of their cell: they must outweigh the frame's jitter noise for
# classes to stay separable after rescaling.

_CORPUS_JITTER = augmentation.AugmentConfig(
    rotation_deg=3.0,
    scale_factor=0.05,
    shift_frac=0.02,
    shear_deg=2.0,
    brightness_delta=12.0,
    contrast_range=(0.9, 1.1),
)

MAX_PROTOTYPE_CLASSES = 2 ** 9 - 1


def draw_prototype(class_index: int, side: int) -> GrayImage:
    """Deterministic ink-on-white prototype glyph for one class."""
    if side < 16:
        raise ValueError("prototype side must be >= 16")
    if not 0 <= class_index < MAX_PROTOTYPE_CLASSES:
        raise ValueError(f"class_index must be < {MAX_PROTOTYPE_CLASSES}")
    px = np.full((side, side), 255, dtype=np.uint8)
    m = int(round(side * 0.10))
    th = max(2, int(round(side * 0.05)))
    lo, hi = m, side - m
    px[lo:hi, lo : lo + th] = 0
    px[lo:hi, hi - th : hi] = 0
    px[lo : lo + th, lo:hi] = 0
    px[hi - th : hi, lo:hi] = 0

    inner_lo = lo + th + 2
    inner_hi = hi - th - 2
    span = inner_hi - inner_lo
    code = class_index + 1
    for cell in range(9):
        if not code >> cell & 1:
            continue
        gy, gx = divmod(cell, 3)
        y0 = inner_lo + (gy * span) // 3
        y1 = inner_lo + ((gy + 1) * span) // 3
        x0 = inner_lo + (gx * span) // 3
        x1 = inner_lo + ((gx + 1) * span) // 3
        pad = max(1, (y1 - y0) // 8)
        bar = max(2, (y1 - y0) // 2)
        cy, cx = (y0 + y1) // 2, (x0 + x1) // 2
        shape = cell % 3
        if shape == 0:
            px[y0 + pad : y1 - pad, x0 + pad : x1 - pad] = 0
        elif shape == 1:
            px[cy - bar // 2 : cy + (bar + 1) // 2, x0 + pad : x1 - pad] = 0
        else:
            px[y0 + pad : y1 - pad, cx - bar // 2 : cx + (bar + 1) // 2] = 0
    return GrayImage(px)


def render_synthetic_corpus(
    classes: int, per_class: int, side: int, seed: int
) -> Dataset:
    """Procedural stand-in corpus: distinct, seeded, bit-reproducible.

    Sample 0 of each class is the conditioned prototype; further samples
    add mild geometric/photometric jitter before the same conditioning
    the directory loader applies.
    """
    if classes < 2:
        raise ValueError("need at least 2 classes")
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    digits = max(2, len(str(classes - 1)))
    label_map = LabelMap(tuple(f"c{k:0{digits}d}" for k in range(classes)))
    render_side = max(side * 2, 32)
    samples: list[tuple[GrayImage, int]] = []
    for k in range(classes):
        proto = draw_prototype(k, render_side)
        rng = augmentation.class_rng(seed, k)
        samples.append((condition_glyph(proto, side), k))
        for _ in range(per_class - 1):
            p = augmentation.sample_params(_CORPUS_JITTER, rng)
            samples.append((condition_glyph(augmentation.augment_image(proto, p), side), k))
    return Dataset(samples=tuple(samples), label_map=label_map)


def to_model_input(img: GrayImage) -> np.ndarray:
    """Map gray pixels to the network's input scale: ink 1.0, paper 0.0."""
    return (255.0 - img.pixels.astype(np.float64)) / 255.0


def dataset_to_arrays(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Stack a dataset as (n, 1, h, w) float inputs and (n,) int labels."""
    if not ds.samples:
        raise ValueError("dataset is empty")
    x = np.stack([to_model_input(img) for img, _ in ds.samples])[:, None, :, :]
    y = np.array([idx for _, idx in ds.samples], dtype=np.int64)
    return x, y
