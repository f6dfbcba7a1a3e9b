"""Builders for the three glyph-classifier architectures.

All builders target 32x32 single-channel glyph canvases (the output of
``normalize_glyph``) and end in a softmax over the class count.  Width knobs
(``width_scale`` / ``width_multiplier``) shrink channel plans proportionally
so gradient checks can run on miniature variants; they default to full width.
"""

from __future__ import annotations

from dataclasses import dataclass

from .tensornet import LayerSpec, ModelGraph, build_model
from .tensornet.ops import conv_out_size

MODEL_INPUT_SHAPE = (1, 32, 32)

ARCHITECTURE_NAMES = ("lenet", "vgg_small", "mobilenet_micro")
POOLING_MODES = ("max", "avg")

# Early-stopping patience each architecture ships with.
DEFAULT_PATIENCE = {"lenet": 5, "vgg_small": 5, "mobilenet_micro": 4}


@dataclass(frozen=True)
class ArchitectureId:
    """Names a buildable architecture; pooling applies to mobilenet_micro only."""

    name: str
    pooling: str | None = None

    def __post_init__(self) -> None:
        if self.name not in ARCHITECTURE_NAMES:
            raise ValueError(f"unknown architecture {self.name!r}")
        if self.name == "mobilenet_micro":
            if self.pooling not in POOLING_MODES:
                raise ValueError("mobilenet_micro requires pooling 'max' or 'avg'")
        elif self.pooling is not None:
            raise ValueError(f"pooling is not configurable for {self.name}")


def _scaled(width: int, scale: float) -> int:
    return max(1, int(round(width * scale)))


_LENET_CONV = (6, 16)
_LENET_DENSE = (120, 84)


def build_lenet(classes: int, *, seed: int = 0, width_scale: float = 1.0) -> ModelGraph:
    """Two sigmoid conv+maxpool stages feeding three dense layers.

    Parameterized layers: conv, conv, dense, dense, dense(classes) -- five in
    total.  32x32 input shrinks to 5x5x16 before the flatten.
    """
    if classes < 2:
        raise ValueError("classes must be >= 2")
    c1, c2 = (_scaled(c, width_scale) for c in _LENET_CONV)
    d1, d2 = (_scaled(d, width_scale) for d in _LENET_DENSE)
    layers = (
        LayerSpec(kind="conv2d", out_channels=c1, kernel=5),
        LayerSpec(kind="activation", activation="sigmoid"),
        LayerSpec(kind="maxpool", kernel=2, stride=2),
        LayerSpec(kind="conv2d", out_channels=c2, kernel=5),
        LayerSpec(kind="activation", activation="sigmoid"),
        LayerSpec(kind="maxpool", kernel=2, stride=2),
        LayerSpec(kind="flatten"),
        LayerSpec(kind="dense", units=d1),
        LayerSpec(kind="activation", activation="sigmoid"),
        LayerSpec(kind="dense", units=d2),
        LayerSpec(kind="activation", activation="sigmoid"),
        LayerSpec(kind="dense", units=classes),
        LayerSpec(kind="activation", activation="softmax"),
    )
    return build_model(layers, MODEL_INPUT_SHAPE, classes, seed=seed)


# Conv widths per pool stage; 32x32 halves to 1x1 across the five pools.
_VGG_CONV_PLAN = ((64, 64), (128, 128), (256, 256, 256), (512, 512, 512), (512, 512, 512))
_VGG_DENSE_HIDDEN = (256, 128)


def build_vgg_small(classes: int, *, seed: int = 0, width_scale: float = 1.0) -> ModelGraph:
    """Thirteen sigmoid conv layers in five pooled stages, then three dense layers.

    The two hidden dense layers use ELU; with the classifier head that makes
    16 weighted layers.  Hidden dense widths are sized for 32x32 inputs.
    """
    if classes < 2:
        raise ValueError("classes must be >= 2")
    layers: list[LayerSpec] = []
    for stage in _VGG_CONV_PLAN:
        for width in stage:
            layers.append(LayerSpec(kind="conv2d", out_channels=_scaled(width, width_scale),
                                    kernel=3, padding=1))
            layers.append(LayerSpec(kind="activation", activation="sigmoid"))
        layers.append(LayerSpec(kind="maxpool", kernel=2, stride=2))
    layers.append(LayerSpec(kind="flatten"))
    for width in _VGG_DENSE_HIDDEN:
        layers.append(LayerSpec(kind="dense", units=_scaled(width, width_scale)))
        layers.append(LayerSpec(kind="activation", activation="elu"))
    layers.append(LayerSpec(kind="dense", units=classes))
    layers.append(LayerSpec(kind="activation", activation="softmax"))
    return build_model(tuple(layers), MODEL_INPUT_SHAPE, classes, seed=seed)


_MOBILENET_STEM = 8
# (out_channels, depthwise stride); channels double at each stride-2 stage.
_MOBILENET_BLOCKS = ((16, 2), (16, 1), (32, 2), (32, 1), (64, 2))
_MOBILENET_HIDDEN = 128


def build_mobilenet_micro(classes: int, *, pooling: str = "avg", seed: int = 0,
                          width_multiplier: float = 1.0) -> ModelGraph:
    """Depthwise-separable stack: stem conv, five ds blocks, global pool, 128-wide head.

    Each block is a 3x3 depthwise conv followed by a 1x1 pointwise conv, both
    ELU-activated.  ``pooling`` picks the global pooling mode; the hidden dense
    layer is always 128 wide.
    """
    if classes < 2:
        raise ValueError("classes must be >= 2")
    if pooling not in POOLING_MODES:
        raise ValueError(f"pooling must be one of {POOLING_MODES}")
    side = MODEL_INPUT_SHAPE[1]
    layers: list[LayerSpec] = [
        LayerSpec(kind="conv2d", out_channels=_scaled(_MOBILENET_STEM, width_multiplier),
                  kernel=3, padding=1),
        LayerSpec(kind="activation", activation="elu"),
    ]
    side = conv_out_size(MODEL_INPUT_SHAPE[1], 3, 1, 1)
    for out_channels, stride in _MOBILENET_BLOCKS:
        layers.append(LayerSpec(kind="depthwise_conv2d", kernel=3, stride=stride, padding=1))
        layers.append(LayerSpec(kind="activation", activation="elu"))
        layers.append(LayerSpec(kind="pointwise_conv2d",
                                out_channels=_scaled(out_channels, width_multiplier)))
        layers.append(LayerSpec(kind="activation", activation="elu"))
        side = conv_out_size(side, 3, stride, 1)
    pool_kind = "maxpool" if pooling == "max" else "avgpool"
    layers += [
        LayerSpec(kind=pool_kind, kernel=side, stride=side),
        LayerSpec(kind="flatten"),
        LayerSpec(kind="dense", units=_MOBILENET_HIDDEN),
        LayerSpec(kind="activation", activation="elu"),
        LayerSpec(kind="dense", units=classes),
        LayerSpec(kind="activation", activation="softmax"),
    ]
    return build_model(tuple(layers), MODEL_INPUT_SHAPE, classes, seed=seed)


def build_architecture(arch: ArchitectureId, classes: int, *, seed: int = 0) -> ModelGraph:
    """Build any registered architecture from its id."""
    if arch.name == "lenet":
        return build_lenet(classes, seed=seed)
    if arch.name == "vgg_small":
        return build_vgg_small(classes, seed=seed)
    return build_mobilenet_micro(classes, pooling=arch.pooling, seed=seed)
