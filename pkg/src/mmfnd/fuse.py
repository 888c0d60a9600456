"""Adaptive gated fusion of the feature channels and the classifier head.

A per-item sigmoid gate is learned for every feature channel from the
mean of the stacked channels; gated channels are concatenated in a fixed
order and classified by a two-layer MLP with a 2-way softmax.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (
    Param,
    Tensor,
    add,
    affine,
    clip,
    concat,
    log,
    matvec,
    mean_pool,
    relu,
    scale,
    scale_by,
    sigmoid,
    softmax_vec,
    stack_rows,
    take_at,
)

REAL, FAKE = 0, 1
PROB_CLAMP = 1e-12


@dataclass
class Prediction:
    """Classifier output for one item; ties in argmax resolve to real."""

    probs: np.ndarray
    label: int
    gates: tuple[float, ...] | None = None


def adaptive_weights(features: list[Tensor], w_g: Param, b_g: Param) -> Tensor:
    """Per-channel sigmoid gates from the column-wise mean of the stack."""
    pooled = mean_pool(stack_rows(features), axis=0)
    return sigmoid(add(matvec(w_g, pooled), b_g))


def fuse(features: list[Tensor], gates: Tensor | None) -> Tensor:
    """Concatenate the channels, each scaled by its gate.

    ``gates=None`` is the plain-concatenation variant (all gates one).
    Channel order is fixed: enhanced text, image, interaction.
    """
    if gates is None:
        return concat(features)
    return concat([scale_by(f, take_at(gates, i)) for i, f in enumerate(features)])


def classify(x: Tensor, w1: Param, b1: Param, w2: Param, b2: Param) -> tuple[Tensor, int]:
    """Class distribution and hard label for a fused representation."""
    hidden = relu(add(matvec(w1, x), b1))
    logits = add(matvec(w2, hidden), b2)
    probs = softmax_vec(logits)
    return probs, int(np.argmax(probs.data))


def detection_loss(probs: Tensor, y: int) -> Tensor:
    """Binary cross-entropy on the fake-class probability.

    The probability is clamped to [1e-12, 1 - 1e-12], so the loss is
    finite for any prediction and strictly positive.
    """
    p = clip(take_at(probs, FAKE), PROB_CLAMP, 1.0 - PROB_CLAMP)
    if y == FAKE:
        return scale(log(p), -1.0)
    return scale(log(affine(p, -1.0, 1.0)), -1.0)


def total_loss(l_c: Tensor, l_d: Tensor, lambda_c: float = 1.0) -> Tensor:
    """Combined objective; the default weight keeps the plain sum."""
    if lambda_c == 1.0:
        return add(l_c, l_d)
    return add(scale(l_c, lambda_c), l_d)
