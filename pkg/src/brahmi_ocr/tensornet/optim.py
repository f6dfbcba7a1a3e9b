"""Adam optimizer over per-layer parameter dicts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ops import ShapeMismatch


@dataclass
class AdamState:
    """First/second moment mirrors of the parameter tree plus a step counter."""

    m: list[dict[str, np.ndarray]]
    v: list[dict[str, np.ndarray]]
    step: int = 0

    @classmethod
    def for_params(cls, params) -> "AdamState":
        zeros = lambda tree: [{k: np.zeros_like(a) for k, a in layer.items()} for layer in tree]
        return cls(m=zeros(params), v=zeros(params))


def adam_step(params, grads, state: AdamState, lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update, applied in place; returns (params, state)."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatch("params, grads, and state must have one entry per layer")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for layer, glayer, mlayer, vlayer in zip(params, grads, state.m, state.v):
        if set(layer) != set(glayer):
            raise ShapeMismatch(f"gradient keys {sorted(glayer)} != params {sorted(layer)}")
        for name, p in layer.items():
            g = glayer[name]
            if g.shape != p.shape:
                raise ShapeMismatch(f"grad shape {g.shape} != param shape {p.shape}")
            m = mlayer[name]
            v = vlayer[name]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state
