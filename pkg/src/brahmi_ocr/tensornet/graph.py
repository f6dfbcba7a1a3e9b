"""Sequential model graphs: layer specs, shape checking, forward, backprop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .ops import ShapeMismatch, as_tensor, scce_loss_and_grad

LAYER_KINDS = (
    "conv2d",
    "depthwise_conv2d",
    "pointwise_conv2d",
    "maxpool",
    "avgpool",
    "flatten",
    "dense",
    "activation",
)
ACTIVATION_KINDS = ("sigmoid", "elu", "softmax")


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a sequential graph; fields used depend on kind."""

    kind: str
    out_channels: int | None = None
    kernel: int | None = None
    stride: int = 1
    padding: int = 0
    units: int | None = None
    activation: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.stride < 1 or self.padding < 0:
            raise ValueError("stride must be >= 1 and padding >= 0")
        if self.kind == "conv2d":
            if not (self.out_channels and self.out_channels >= 1):
                raise ValueError("conv2d needs out_channels >= 1")
            if not (self.kernel and self.kernel >= 1):
                raise ValueError("conv2d needs kernel >= 1")
        elif self.kind == "depthwise_conv2d":
            if not (self.kernel and self.kernel >= 1):
                raise ValueError("depthwise_conv2d needs kernel >= 1")
            if self.out_channels is not None:
                raise ValueError("depthwise_conv2d preserves channels")
        elif self.kind == "pointwise_conv2d":
            if not (self.out_channels and self.out_channels >= 1):
                raise ValueError("pointwise_conv2d needs out_channels >= 1")
            if self.kernel not in (None, 1) or self.stride != 1 or self.padding != 0:
                raise ValueError("pointwise_conv2d is a 1x1, stride-1, unpadded conv")
        elif self.kind in ("maxpool", "avgpool"):
            if not (self.kernel and self.kernel >= 1):
                raise ValueError(f"{self.kind} needs kernel >= 1")
        elif self.kind == "dense":
            if not (self.units and self.units >= 1):
                raise ValueError("dense needs units >= 1")
        elif self.kind == "activation":
            if self.activation not in ACTIVATION_KINDS:
                raise ValueError(f"activation must be one of {ACTIVATION_KINDS}")


def _trace_shapes(layers, input_shape):
    """Yield (state, param_shapes) per layer; state is ('image', c, h, w) or ('flat', d)."""
    if len(input_shape) != 3 or any(d < 1 for d in input_shape):
        raise ShapeMismatch(f"input_shape must be (channels, h, w) >= 1, got {input_shape}")
    state = ("image",) + tuple(input_shape)
    out = []
    for spec in layers:
        params: dict[str, tuple] = {}
        if spec.kind in ("conv2d", "depthwise_conv2d", "pointwise_conv2d",
                         "maxpool", "avgpool"):
            if state[0] != "image":
                raise ShapeMismatch(f"{spec.kind} needs image input, have flat {state[1]}")
            _, c, h, w = state
            if spec.kind == "conv2d":
                k = spec.kernel
                oh = ops.conv_out_size(h, k, spec.stride, spec.padding)
                ow = ops.conv_out_size(w, k, spec.stride, spec.padding)
                params = {"weight": (spec.out_channels, c, k, k), "bias": (spec.out_channels,)}
                state = ("image", spec.out_channels, oh, ow)
            elif spec.kind == "depthwise_conv2d":
                k = spec.kernel
                oh = ops.conv_out_size(h, k, spec.stride, spec.padding)
                ow = ops.conv_out_size(w, k, spec.stride, spec.padding)
                params = {"weight": (c, 1, k, k), "bias": (c,)}
                state = ("image", c, oh, ow)
            elif spec.kind == "pointwise_conv2d":
                params = {"weight": (spec.out_channels, c, 1, 1), "bias": (spec.out_channels,)}
                state = ("image", spec.out_channels, h, w)
            else:
                k = spec.kernel
                oh = ops.conv_out_size(h, k, spec.stride, 0)
                ow = ops.conv_out_size(w, k, spec.stride, 0)
                state = ("image", c, oh, ow)
        elif spec.kind == "flatten":
            if state[0] == "image":
                state = ("flat", state[1] * state[2] * state[3])
        elif spec.kind == "dense":
            if state[0] != "flat":
                raise ShapeMismatch("dense needs flat input; add a flatten layer first")
            params = {"weight": (state[1], spec.units), "bias": (spec.units,)}
            state = ("flat", spec.units)
        elif spec.kind == "activation":
            if spec.activation == "softmax" and state[0] != "flat":
                raise ShapeMismatch("softmax applies to flat feature vectors")
        out.append((state, params))
    return out


@dataclass
class ModelGraph:
    """Ordered layers plus their parameter arrays; shape-checked on build."""

    layers: tuple[LayerSpec, ...]
    parameters: list[dict[str, np.ndarray]]
    input_shape: tuple[int, int, int]
    num_classes: int

    def __post_init__(self) -> None:
        self.layers = tuple(self.layers)
        self.input_shape = tuple(self.input_shape)
        trace = _trace_shapes(self.layers, self.input_shape)
        if len(self.parameters) != len(self.layers):
            raise ShapeMismatch("one parameter dict per layer required")
        for i, ((_, expected), given) in enumerate(zip(trace, self.parameters)):
            if set(given) != set(expected):
                raise ShapeMismatch(
                    f"layer {i} ({self.layers[i].kind}) expects params {sorted(expected)}, "
                    f"got {sorted(given)}"
                )
            for name, shape in expected.items():
                if given[name].shape != shape:
                    raise ShapeMismatch(
                        f"layer {i} param {name}: expected shape {shape}, "
                        f"got {given[name].shape}"
                    )
        final_state = trace[-1][0] if trace else ("image",) + self.input_shape
        last = self.layers[-1] if self.layers else None
        if (
            last is None
            or last.kind != "activation"
            or last.activation != "softmax"
            or final_state != ("flat", self.num_classes)
        ):
            raise ShapeMismatch(
                f"model must end in softmax over {self.num_classes} classes"
            )

    def output_shapes(self):
        return [state for state, _ in _trace_shapes(self.layers, self.input_shape)]


def init_params(layers, input_shape, seed: int) -> list[dict[str, np.ndarray]]:
    """Glorot-uniform weights, zero biases, drawn in layer order from one rng."""
    rng = np.random.default_rng(seed)
    params = []
    for spec, (_, shapes) in zip(layers, _trace_shapes(layers, input_shape)):
        layer_params: dict[str, np.ndarray] = {}
        if "weight" in shapes:
            shape = shapes["weight"]
            if spec.kind == "depthwise_conv2d":
                fan_in = fan_out = shape[2] * shape[3]  # one k x k filter per channel
            elif len(shape) == 4:
                k2 = shape[2] * shape[3]
                fan_in, fan_out = shape[1] * k2, shape[0] * k2
            else:
                fan_in, fan_out = shape[0], shape[1]
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            layer_params["weight"] = rng.uniform(-limit, limit, size=shape)
            layer_params["bias"] = np.zeros(shapes["bias"])
        params.append(layer_params)
    return params


def build_model(layers, input_shape, num_classes: int, seed: int) -> ModelGraph:
    """Validate the layer stack and initialize parameters from the seed."""
    layers = tuple(layers)
    return ModelGraph(
        layers=layers,
        parameters=init_params(layers, input_shape, seed),
        input_shape=tuple(input_shape),
        num_classes=num_classes,
    )


def clone_params(params) -> list[dict[str, np.ndarray]]:
    return [{k: v.copy() for k, v in layer.items()} for layer in params]


def _layer_forward(spec: LayerSpec, params, x):
    if spec.kind == "conv2d":
        return ops.conv2d_forward(x, params["weight"], params["bias"],
                                  spec.stride, spec.padding)
    if spec.kind == "depthwise_conv2d":
        return ops.depthwise_forward(x, params["weight"], params["bias"],
                                     spec.stride, spec.padding)
    if spec.kind == "pointwise_conv2d":
        return ops.conv2d_forward(x, params["weight"], params["bias"], 1, 0)
    if spec.kind == "maxpool":
        return ops.maxpool_forward(x, spec.kernel, spec.stride)
    if spec.kind == "avgpool":
        return ops.avgpool_forward(x, spec.kernel, spec.stride)
    if spec.kind == "flatten":
        return ops.flatten_forward(x)
    if spec.kind == "dense":
        return ops.dense_forward(x, params["weight"], params["bias"])
    fwd, _ = ops._ACTIVATIONS[spec.activation]
    return fwd(x)


def _layer_backward(spec: LayerSpec, cache, dout):
    if spec.kind in ("conv2d", "pointwise_conv2d"):
        dx, dw, db = ops.conv2d_backward(dout, cache)
        return dx, {"weight": dw, "bias": db}
    if spec.kind == "depthwise_conv2d":
        dx, dw, db = ops.depthwise_backward(dout, cache)
        return dx, {"weight": dw, "bias": db}
    if spec.kind == "maxpool":
        return ops.maxpool_backward(dout, cache), {}
    if spec.kind == "avgpool":
        return ops.avgpool_backward(dout, cache), {}
    if spec.kind == "flatten":
        return ops.flatten_backward(dout, cache), {}
    if spec.kind == "dense":
        dx, dw, db = ops.dense_backward(dout, cache)
        return dx, {"weight": dw, "bias": db}
    _, bwd = ops._ACTIVATIONS[spec.activation]
    return bwd(dout, cache), {}


def forward(model: ModelGraph, x, with_caches: bool = False):
    """Run the graph; returns class probabilities (and caches when asked)."""
    x = as_tensor(x)
    if x.ndim != 4 or x.shape[1:] != model.input_shape:
        raise ShapeMismatch(
            f"input must be (n, {', '.join(map(str, model.input_shape))}), got {x.shape}"
        )
    caches = []
    for spec, params in zip(model.layers, model.parameters):
        x, cache = _layer_forward(spec, params, x)
        caches.append(cache)
    return (x, caches) if with_caches else x


def backprop(model: ModelGraph, inputs, labels):
    """Mean scce loss, probabilities, and gradients per trainable parameter."""
    probs, caches = forward(model, inputs, with_caches=True)
    loss, d = scce_loss_and_grad(probs, labels)
    grads: list[dict[str, np.ndarray]] = [{} for _ in model.layers]
    for i in range(len(model.layers) - 1, -1, -1):
        d, g = _layer_backward(model.layers[i], caches[i], d)
        grads[i] = g
    return loss, probs, grads


def count_params(model: ModelGraph) -> int:
    """Total trainable scalar count (weights plus biases)."""
    return sum(int(v.size) for layer in model.parameters for v in layer.values())
