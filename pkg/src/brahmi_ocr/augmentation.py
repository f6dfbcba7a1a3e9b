"""Seeded geometric and photometric augmentation for glyph datasets.

Every transform is pure and every random choice flows from an explicit
64-bit seed, so an expanded dataset is a deterministic function of
(originals, config, seed).  The generator is numpy's PCG64; the name is
exported so manifests can record it alongside the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imagecore import GrayImage, round_half_up

GENERATOR_NAME = "numpy-pcg64"


class EmptyClass(ValueError):
    """A dataset class has no samples to augment from."""


@dataclass(frozen=True)
class AugmentConfig:
    """Sampling bounds for one augmentation draw.

    Each magnitude bounds a symmetric interval about the identity:
    rotation in [-rotation_deg, +rotation_deg] degrees, zoom in
    [1 - scale_factor, 1 + scale_factor], per-axis shift in
    [-shift_frac, +shift_frac] of the image dimension, and so on.
    """

    rotation_deg: float = 10.0
    scale_factor: float = 0.2
    shift_frac: float = 0.15
    shear_deg: float = 10.0
    brightness_delta: float = 25.0
    contrast_range: tuple[float, float] = (0.8, 1.2)

    def __post_init__(self) -> None:
        for name in ("rotation_deg", "scale_factor", "shift_frac",
                     "shear_deg", "brightness_delta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 <= self.scale_factor < 1:
            raise ValueError("scale_factor must be in [0, 1) so zoom stays positive")
        if self.shear_deg >= 85:
            raise ValueError("shear_deg must be < 85 degrees")
        lo, hi = self.contrast_range
        if lo <= 0 or hi <= 0 or lo > hi:
            raise ValueError("contrast_range bounds must be positive with lo <= hi")

    @classmethod
    def identity(cls) -> "AugmentConfig":
        """Degenerate bounds: sampling always yields the identity params."""
        return cls(rotation_deg=0.0, scale_factor=0.0, shift_frac=0.0,
                   shear_deg=0.0, brightness_delta=0.0, contrast_range=(1.0, 1.0))


@dataclass(frozen=True)
class AugmentParams:
    """One concrete draw: the composite transform to apply to an image."""

    rotation: float
    scale: float
    shift_x: float
    shift_y: float
    shear: float
    brightness: float = 0.0
    contrast: float = 1.0

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.contrast <= 0:
            raise ValueError("contrast must be positive")

    @classmethod
    def identity(cls) -> "AugmentParams":
        return cls(rotation=0.0, scale=1.0, shift_x=0.0, shift_y=0.0,
                   shear=0.0, brightness=0.0, contrast=1.0)

    def as_dict(self) -> dict[str, float]:
        return {
            "rotation": self.rotation,
            "scale": self.scale,
            "shift_x": self.shift_x,
            "shift_y": self.shift_y,
            "shear": self.shear,
            "brightness": self.brightness,
            "contrast": self.contrast,
        }


@dataclass(frozen=True)
class RngSeed:
    """64-bit unsigned seed for the augmentation stream."""

    seed: int

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")


def _linear_part(p: AugmentParams) -> np.ndarray:
    """Rotation @ scale @ shear acting on (x, y) column vectors."""
    th = math.radians(p.rotation)
    rot = np.array([[math.cos(th), -math.sin(th)],
                    [math.sin(th), math.cos(th)]])
    scale = np.array([[p.scale, 0.0], [0.0, p.scale]])
    shear = np.array([[1.0, math.tan(math.radians(p.shear))], [0.0, 1.0]])
    return rot @ scale @ shear


def _bilinear(px: np.ndarray, sx: np.ndarray, sy: np.ndarray, fill: float) -> np.ndarray:
    """Sample px at float coords (sx, sy); corners outside read as fill."""
    h, w = px.shape
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    wx = sx - x0
    wy = sy - y0
    acc = np.zeros(sx.shape, dtype=np.float64)
    for dy in (0, 1):
        for dx in (0, 1):
            xi = x0 + dx
            yi = y0 + dy
            inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            corner = np.where(
                inside,
                px[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)].astype(np.float64),
                fill,
            )
            weight = (wx if dx else 1.0 - wx) * (wy if dy else 1.0 - wy)
            acc += weight * corner
    return acc


def affine_transform(img: GrayImage, p: AugmentParams) -> GrayImage:
    """Apply the composite affine map by inverse-mapping with bilinear sampling.

    Forward map: dst = M @ (src - center) + center + shift, where M is
    rotation/scale/shear about the pixel-grid center ((w-1)/2, (h-1)/2)
    and shift is (shift_x * width, shift_y * height).  Destination pixels
    whose source falls outside the input read background (255).
    """
    h, w = img.pixels.shape
    inv = np.linalg.inv(_linear_part(p))
    cx = (w - 1) / 2.0
    cy = (h - 1) / 2.0
    ys, xs = np.mgrid[0:h, 0:w]
    dx = xs - cx - p.shift_x * w
    dy = ys - cy - p.shift_y * h
    sx = inv[0, 0] * dx + inv[0, 1] * dy + cx
    sy = inv[1, 0] * dx + inv[1, 1] * dy + cy
    vals = _bilinear(img.pixels, sx, sy, fill=255.0)
    return GrayImage(np.clip(round_half_up(vals), 0, 255).astype(np.uint8))


def adjust_photometric(img: GrayImage, brightness: float, contrast: float) -> GrayImage:
    """out = clamp(round(contrast * (v - 128) + 128 + brightness), 0, 255)."""
    if contrast <= 0:
        raise ValueError("contrast must be positive")
    v = img.pixels.astype(np.float64)
    out = np.clip(round_half_up(contrast * (v - 128.0) + 128.0 + brightness), 0, 255)
    return GrayImage(out.astype(np.uint8))


def augment_image(img: GrayImage, p: AugmentParams) -> GrayImage:
    """Geometric transform followed by the photometric adjustment."""
    return adjust_photometric(affine_transform(img, p), p.brightness, p.contrast)


def sample_params(cfg: AugmentConfig, rng: np.random.Generator) -> AugmentParams:
    """Draw one parameter set, each field uniform in its configured interval.

    Field order is fixed (rotation, scale, shift_x, shift_y, shear,
    brightness, contrast) so a given generator state always yields the
    same draw.
    """
    return AugmentParams(
        rotation=float(rng.uniform(-cfg.rotation_deg, cfg.rotation_deg)),
        scale=float(rng.uniform(1.0 - cfg.scale_factor, 1.0 + cfg.scale_factor)),
        shift_x=float(rng.uniform(-cfg.shift_frac, cfg.shift_frac)),
        shift_y=float(rng.uniform(-cfg.shift_frac, cfg.shift_frac)),
        shear=float(rng.uniform(-cfg.shear_deg, cfg.shear_deg)),
        brightness=float(rng.uniform(-cfg.brightness_delta, cfg.brightness_delta)),
        contrast=float(rng.uniform(cfg.contrast_range[0], cfg.contrast_range[1])),
    )


def class_rng(seed: RngSeed | int, class_index: int) -> np.random.Generator:
    """Per-class generator: the run seed mixed with the class index.

    Keeps expansion deterministic regardless of the order classes are
    processed in, so per-class work may run in parallel.
    """
    base = seed.seed if isinstance(seed, RngSeed) else int(seed)
    return np.random.default_rng([base, class_index])


def expand_dataset(ds, per_class_target: int, cfg: AugmentConfig,
                   seed: RngSeed | int, param_log: list | None = None):
    """Grow every class to exactly per_class_target samples.

    Originals come first in their load order, then augmented copies made
    by cycling through the originals with freshly sampled params.  Output
    samples are grouped by class in label order.  When param_log is a
    list, one record per augmented sample is appended (for manifests).
    """
    from .dataset import Dataset  # runtime import: dataset builds on these transforms

    if per_class_target < 1:
        raise ValueError("per_class_target must be >= 1")
    by_class: dict[int, list[GrayImage]] = {i: [] for i in range(len(ds.label_map))}
    for img, idx in ds.samples:
        by_class[idx].append(img)

    out: list[tuple[GrayImage, int]] = []
    for idx in range(len(ds.label_map)):
        originals = by_class[idx]
        if not originals:
            raise EmptyClass(f"class {ds.label_map.names[idx]!r} has no samples")
        if per_class_target < len(originals):
            raise ValueError(
                f"per_class_target {per_class_target} < existing class size {len(originals)}"
            )
        rng = class_rng(seed, idx)
        out.extend((img, idx) for img in originals)
        for i in range(per_class_target - len(originals)):
            src_pos = i % len(originals)
            p = sample_params(cfg, rng)
            out.append((augment_image(originals[src_pos], p), idx))
            if param_log is not None:
                param_log.append({
                    "class_index": idx,
                    "class_name": ds.label_map.names[idx],
                    "source_position": src_pos,
                    "params": p.as_dict(),
                })
    return Dataset(samples=tuple(out), label_map=ds.label_map)
