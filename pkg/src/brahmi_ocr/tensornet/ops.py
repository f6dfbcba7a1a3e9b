"""Array-level layer operations and their hand-derived backward passes.

Layout conventions: images are NCHW, conv kernels [Cout, Cin, k, k],
depthwise kernels [C, 1, k, k], dense weights [D, U].  Convolution is
cross-correlation (no kernel flip).  Everything runs in float64.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

ELU_ALPHA = 1.0
PROB_FLOOR = 1e-12


class ShapeMismatch(ValueError):
    """Operand shapes violate a layer's contract."""


class LabelOutOfRange(ValueError):
    """A class label falls outside [0, num_classes)."""


def as_tensor(x) -> np.ndarray:
    """Coerce to the engine value type: row-major float64 ndarray."""
    return np.ascontiguousarray(np.asarray(x, dtype=np.float64))


def conv_out_size(size: int, kernel: int, stride: int, padding: int) -> int:
    if size + 2 * padding < kernel:
        raise ShapeMismatch(
            f"spatial extent {size} (+2*{padding} padding) smaller than kernel {kernel}"
        )
    return (size + 2 * padding - kernel) // stride + 1


def _check_image(x: np.ndarray) -> None:
    if x.ndim != 4:
        raise ShapeMismatch(f"expected NCHW input, got shape {x.shape}")


def _pad(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _windows(xp: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """(n, c, oh, ow, k, k) sliding view over a padded NCHW array."""
    view = sliding_window_view(xp, (kernel, kernel), axis=(2, 3))
    return view[:, :, ::stride, ::stride]


def _scatter_windows(dcols: np.ndarray, xp_shape: tuple, kernel: int, stride: int) -> np.ndarray:
    """Adjoint of _windows: accumulate per-window grads back onto the plane."""
    n, c, oh, ow = dcols.shape[:4]
    dxp = np.zeros(xp_shape)
    for ki in range(kernel):
        for li in range(kernel):
            dxp[:, :, ki : ki + stride * oh : stride, li : li + stride * ow : stride] += (
                dcols[:, :, :, :, ki, li]
            )
    return dxp


# -- standard convolution -----------------------------------------------

def conv2d_forward(x, w, b, stride: int = 1, padding: int = 0):
    _check_image(x)
    if w.ndim != 4 or w.shape[2] != w.shape[3]:
        raise ShapeMismatch(f"conv kernel must be [Cout, Cin, k, k], got {w.shape}")
    cout, cin, k, _ = w.shape
    if x.shape[1] != cin:
        raise ShapeMismatch(f"input has {x.shape[1]} channels, kernel expects {cin}")
    if b.shape != (cout,):
        raise ShapeMismatch(f"bias must have shape ({cout},), got {b.shape}")
    oh = conv_out_size(x.shape[2], k, stride, padding)
    ow = conv_out_size(x.shape[3], k, stride, padding)
    xp = _pad(x, padding)
    cols = _windows(xp, k, stride)
    out = np.einsum("nihwkl,oikl->nohw", cols, w, optimize=True)
    out += b.reshape(1, -1, 1, 1)
    cache = (x.shape, xp, w, stride, padding, oh, ow)
    return out, cache


def conv2d_backward(dout, cache):
    x_shape, xp, w, stride, padding, oh, ow = cache
    k = w.shape[2]
    cols = _windows(xp, k, stride)
    db = dout.sum(axis=(0, 2, 3))
    dw = np.einsum("nohw,nihwkl->oikl", dout, cols, optimize=True)
    dcols = np.einsum("nohw,oikl->nihwkl", dout, w, optimize=True)
    dxp = _scatter_windows(dcols, xp.shape, k, stride)
    h, wd = x_shape[2], x_shape[3]
    dx = dxp[:, :, padding : padding + h, padding : padding + wd]
    return dx, dw, db


def conv2d(x, w, b, stride: int = 1, padding: int = 0) -> np.ndarray:
    """out[n,o,i,j] = b[o] + sum_{c,p,q} x[n,c,i*s+p-pad,j*s+q-pad] * w[o,c,p,q]."""
    out, _ = conv2d_forward(as_tensor(x), as_tensor(w), as_tensor(b), stride, padding)
    return out


# -- depthwise convolution ----------------------------------------------

def depthwise_forward(x, w, b, stride: int = 1, padding: int = 0):
    _check_image(x)
    if w.ndim != 4 or w.shape[1] != 1 or w.shape[2] != w.shape[3]:
        raise ShapeMismatch(f"depthwise kernel must be [C, 1, k, k], got {w.shape}")
    c, _, k, _ = w.shape
    if x.shape[1] != c:
        raise ShapeMismatch(f"input has {x.shape[1]} channels, depthwise kernel {c}")
    if b.shape != (c,):
        raise ShapeMismatch(f"bias must have shape ({c},), got {b.shape}")
    oh = conv_out_size(x.shape[2], k, stride, padding)
    ow = conv_out_size(x.shape[3], k, stride, padding)
    xp = _pad(x, padding)
    cols = _windows(xp, k, stride)
    out = np.einsum("nchwkl,ckl->nchw", cols, w[:, 0], optimize=True)
    out += b.reshape(1, -1, 1, 1)
    cache = (x.shape, xp, w, stride, padding, oh, ow)
    return out, cache


def depthwise_backward(dout, cache):
    x_shape, xp, w, stride, padding, oh, ow = cache
    k = w.shape[2]
    cols = _windows(xp, k, stride)
    db = dout.sum(axis=(0, 2, 3))
    dw = np.einsum("nchw,nchwkl->ckl", dout, cols, optimize=True)[:, None]
    dcols = dout[:, :, :, :, None, None] * w[:, 0][None, :, None, None, :, :]
    dxp = _scatter_windows(dcols, xp.shape, k, stride)
    h, wd = x_shape[2], x_shape[3]
    dx = dxp[:, :, padding : padding + h, padding : padding + wd]
    return dx, dw, db


def depthwise_separable_conv(x, dw_kernel, pw_kernel, biases=None,
                             stride: int = 1, padding: int = 0) -> np.ndarray:
    """Depthwise k x k conv (stride/padding) followed by a pointwise 1x1 conv.

    biases: optional (depthwise_bias, pointwise_bias); None means zeros.
    Weight count is k^2*Cin + Cin*Cout vs k^2*Cin*Cout for a standard conv.
    """
    x = as_tensor(x)
    dw_kernel = as_tensor(dw_kernel)
    pw_kernel = as_tensor(pw_kernel)
    cin = dw_kernel.shape[0]
    cout = pw_kernel.shape[0]
    db = as_tensor(biases[0]) if biases is not None else np.zeros(cin)
    pb = as_tensor(biases[1]) if biases is not None else np.zeros(cout)
    mid, _ = depthwise_forward(x, dw_kernel, db, stride, padding)
    out, _ = conv2d_forward(mid, pw_kernel, pb, stride=1, padding=0)
    return out


def separable_param_count(kernel: int, cin: int, cout: int) -> int:
    """Weights only: k^2 * Cin for the depthwise stage, Cin * Cout pointwise."""
    return kernel * kernel * cin + cin * cout


def standard_param_count(kernel: int, cin: int, cout: int) -> int:
    return kernel * kernel * cin * cout


# -- pooling --------------------------------------------------------------

def maxpool_forward(x, size: int, stride: int):
    _check_image(x)
    oh = conv_out_size(x.shape[2], size, stride, 0)
    ow = conv_out_size(x.shape[3], size, stride, 0)
    cols = _windows(x, size, stride)
    flat = cols.reshape(*cols.shape[:4], size * size)
    idx = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    cache = (x.shape, idx, size, stride)
    return out, cache


def maxpool_backward(dout, cache):
    x_shape, idx, size, stride = cache
    dflat = np.zeros(idx.shape + (size * size,))
    np.put_along_axis(dflat, idx[..., None], dout[..., None], axis=-1)
    dcols = dflat.reshape(idx.shape + (size, size))
    return _scatter_windows(dcols, x_shape, size, stride)


def avgpool_forward(x, size: int, stride: int):
    _check_image(x)
    conv_out_size(x.shape[2], size, stride, 0)
    conv_out_size(x.shape[3], size, stride, 0)
    cols = _windows(x, size, stride)
    out = cols.mean(axis=(-2, -1))
    cache = (x.shape, size, stride, out.shape)
    return out, cache


def avgpool_backward(dout, cache):
    x_shape, size, stride, out_shape = cache
    share = dout / (size * size)
    dcols = np.broadcast_to(share[..., None, None], out_shape + (size, size))
    return _scatter_windows(dcols, x_shape, size, stride)


def pool2d(x, mode: str, size: int, stride: int | None = None) -> np.ndarray:
    """Window max or mean per channel; stride defaults to the window size."""
    stride = size if stride is None else stride
    x = as_tensor(x)
    if mode == "max":
        out, _ = maxpool_forward(x, size, stride)
    elif mode == "avg":
        out, _ = avgpool_forward(x, size, stride)
    else:
        raise ValueError(f"unknown pooling mode {mode!r}")
    return out


# -- dense ----------------------------------------------------------------

def dense_forward(x, w, b):
    if x.ndim != 2 or w.ndim != 2:
        raise ShapeMismatch(f"dense expects 2-D operands, got {x.shape} and {w.shape}")
    if x.shape[1] != w.shape[0]:
        raise ShapeMismatch(f"inner dims differ: {x.shape[1]} vs {w.shape[0]}")
    if b.shape != (w.shape[1],):
        raise ShapeMismatch(f"bias must have shape ({w.shape[1]},), got {b.shape}")
    out = x @ w + b
    return out, (x, w)


def dense_backward(dout, cache):
    x, w = cache
    dx = dout @ w.T
    dw = x.T @ dout
    db = dout.sum(axis=0)
    return dx, dw, db


def dense(x, w, b) -> np.ndarray:
    out, _ = dense_forward(as_tensor(x), as_tensor(w), as_tensor(b))
    return out


# -- activations ------------------------------------------------------------

def sigmoid_forward(x):
    with np.errstate(over="ignore"):
        out = 1.0 / (1.0 + np.exp(-x))
    return out, out


def sigmoid_backward(dout, out):
    return dout * out * (1.0 - out)


def elu_forward(x):
    out = np.where(x > 0, x, ELU_ALPHA * np.expm1(np.minimum(x, 0.0)))
    return out, (x, out)


def elu_backward(dout, cache):
    x, out = cache
    return np.where(x > 0, dout, dout * (out + ELU_ALPHA))


def softmax_forward(x):
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)
    return out, out


def softmax_backward(dout, out):
    inner = (dout * out).sum(axis=-1, keepdims=True)
    return out * (dout - inner)


_ACTIVATIONS = {
    "sigmoid": (sigmoid_forward, sigmoid_backward),
    "elu": (elu_forward, elu_backward),
    "softmax": (softmax_forward, softmax_backward),
}


def activate(x, kind: str) -> np.ndarray:
    """sigmoid, elu (alpha=1), or softmax over the last axis."""
    if kind not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {kind!r}")
    out, _ = _ACTIVATIONS[kind][0](as_tensor(x))
    return out


# -- flatten ---------------------------------------------------------------

def flatten_forward(x):
    return x.reshape(x.shape[0], -1), x.shape


def flatten_backward(dout, in_shape):
    return dout.reshape(in_shape)


def flatten(x) -> np.ndarray:
    """Collapse non-batch dims, preserving row-major element order."""
    x = as_tensor(x)
    out, _ = flatten_forward(x)
    return out


# -- loss --------------------------------------------------------------------

def _check_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ShapeMismatch(f"labels must be 1-D, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise LabelOutOfRange("labels must be integers")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise LabelOutOfRange(
            f"labels must lie in [0, {num_classes}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )
    return labels


def scce_loss(probs, labels) -> float:
    """Mean over the batch of -ln(probs[i, labels[i]]), floored at 1e-12."""
    probs = as_tensor(probs)
    labels = _check_labels(labels, probs.shape[1])
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())


def scce_loss_and_grad(probs, labels):
    """Loss plus its gradient w.r.t. probs (zero where the floor clamps)."""
    probs = as_tensor(probs)
    labels = _check_labels(labels, probs.shape[1])
    n = len(labels)
    picked = probs[np.arange(n), labels]
    clamped = np.maximum(picked, PROB_FLOOR)
    loss = float(-np.log(clamped).mean())
    dprobs = np.zeros_like(probs)
    live = picked > PROB_FLOOR
    dprobs[np.arange(n)[live], labels[live]] = -1.0 / (n * clamped[live])
    return loss, dprobs
