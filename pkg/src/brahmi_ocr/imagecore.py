"""Image value types and codecs shared by every pipeline stage.

Images are thin immutable wrappers around 2-D (grayscale, binary) or 3-D
(RGB) numpy arrays in row-major layout. Two interchange formats are
supported: PNG (via Pillow) and binary PGM (P5, maxval 255), the latter
because its fixtures are trivially constructable by hand in tests.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
PGM_MAGIC = b"P5"


class MalformedImage(ValueError):
    """Byte stream claims a known format but cannot be decoded."""


class UnsupportedFormat(ValueError):
    """Byte stream is not PNG or binary PGM."""


def _freeze(obj, name: str, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    object.__setattr__(obj, name, arr)


class _PixelEquality:
    def __eq__(self, other) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class RgbImage(_PixelEquality):
    """Row-major (height, width, 3) raster of uint8 channel triples."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = _as_intensity_array(self.pixels)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"RgbImage needs (h, w, 3) pixels, got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image dimensions must be >= 1")
        _freeze(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class GrayImage(_PixelEquality):
    """Row-major (height, width) raster of uint8 intensities."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = _as_intensity_array(self.pixels)
        if arr.ndim != 2:
            raise ValueError(f"GrayImage needs (h, w) pixels, got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image dimensions must be >= 1")
        _freeze(self, "pixels", arr)

    @classmethod
    def from_flat(cls, width: int, height: int, values) -> "GrayImage":
        arr = np.asarray(values).reshape(height, width)
        return cls(arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class BinaryImage(_PixelEquality):
    """Row-major (height, width) raster of booleans; True is foreground ink."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels)
        if arr.dtype != np.bool_:
            if not np.isin(arr, (0, 1)).all():
                raise ValueError("BinaryImage pixels must be boolean")
            arr = arr.astype(bool)
        if arr.ndim != 2:
            raise ValueError(f"BinaryImage needs (h, w) pixels, got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image dimensions must be >= 1")
        _freeze(self, "pixels", arr)

    @classmethod
    def from_flat(cls, width: int, height: int, values) -> "BinaryImage":
        arr = np.asarray(values, dtype=bool).reshape(height, width)
        return cls(arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def foreground_count(self) -> int:
        return int(self.pixels.sum())


def _as_intensity_array(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype == np.uint8:
        return arr
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"intensities must be integers, got dtype {arr.dtype}")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValueError("intensities must lie in [0, 255]")
    return arr.astype(np.uint8)


def round_half_up(x) -> np.ndarray:
    """Round with ties going up, the convention used everywhere in this package."""
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


def to_grayscale(img: RgbImage) -> GrayImage:
    """Convert RGB to gray with BT.601 luma weights (0.299, 0.587, 0.114)."""
    rgb = img.pixels.astype(np.float64)
    luma = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return GrayImage(np.clip(round_half_up(luma), 0, 255).astype(np.uint8))


def binary_to_gray(img: BinaryImage) -> GrayImage:
    """Foreground ink maps to 0 (black), background to 255."""
    return GrayImage(np.where(img.pixels, 0, 255).astype(np.uint8))


def decode_image(data: bytes) -> RgbImage | GrayImage:
    """Decode PNG or binary PGM bytes.

    Raises MalformedImage on truncated/corrupt streams and
    UnsupportedFormat for anything that is neither format.
    """
    if len(data) < 2:
        raise MalformedImage("image stream is empty or shorter than any magic")
    if data.startswith(PGM_MAGIC) and (len(data) == 2 or data[2:3].isspace()):
        return _decode_pgm(data)
    if data.startswith(PNG_MAGIC[: min(len(data), len(PNG_MAGIC))]):
        if len(data) < len(PNG_MAGIC):
            raise MalformedImage("truncated PNG signature")
        return _decode_png(data)
    raise UnsupportedFormat("only PNG and binary PGM (P5) streams are supported")


def encode_image(img: GrayImage | BinaryImage, format: str = "png") -> bytes:
    """Encode to PNG or PGM; binary images encode as ink=0, background=255."""
    if isinstance(img, BinaryImage):
        img = binary_to_gray(img)
    if not isinstance(img, GrayImage):
        raise TypeError(f"cannot encode {type(img).__name__}")
    if format == "pgm":
        header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
        return header + img.pixels.tobytes()
    if format == "png":
        buf = io.BytesIO()
        Image.fromarray(img.pixels, mode="L").save(buf, format="PNG")
        return buf.getvalue()
    raise ValueError(f"unknown format {format!r}")


def _decode_png(data: bytes) -> RgbImage | GrayImage:
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            if im.mode == "1":
                im = im.convert("L")
            if im.mode == "L":
                return GrayImage(np.asarray(im, dtype=np.uint8))
            rgb = im.convert("RGB")
            return RgbImage(np.asarray(rgb, dtype=np.uint8))
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise MalformedImage(f"bad PNG stream: {exc}") from exc


def _decode_pgm(data: bytes) -> GrayImage:
    try:
        width, height, maxval, offset = _parse_pnm_header(data)
    except (ValueError, IndexError) as exc:
        raise MalformedImage(f"bad PGM header: {exc}") from exc
    if maxval != 255:
        raise UnsupportedFormat(f"only maxval 255 PGM is supported, got {maxval}")
    if width < 1 or height < 1:
        raise MalformedImage(f"bad PGM dimensions {width}x{height}")
    payload = data[offset : offset + width * height]
    if len(payload) != width * height:
        raise MalformedImage("truncated PGM payload")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return GrayImage(arr)


def _parse_pnm_header(data: bytes) -> tuple[int, int, int, int]:
    """Return (width, height, maxval, payload offset); honors '#' comments."""
    pos = 2  # past magic
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] not in (0x0A, 0x0D):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("header ended early")
        fields.append(int(data[start:pos]))
    # exactly one whitespace byte separates maxval from the payload
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise ValueError("missing separator before payload")
    return fields[0], fields[1], fields[2], pos + 1
