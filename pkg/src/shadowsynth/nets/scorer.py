"""Minimal patch scorer used to evaluate the least-squares adversarial terms."""

from __future__ import annotations

from .._validation import ShapeError, check_tensor
from ..nn.layers import Activation, Conv2d, Sequential, child_seed

SCORER_WIDTHS = (16, 32, 64)
MIN_SIZE = 16


class PatchScorer(Sequential):
    """Three stride-2 conv+ReLU layers and a 1x1 head; raw (unsquashed) scores."""

    def __init__(self, in_channels=3, widths=SCORER_WIDTHS, seed=0):
        layers = []
        c_prev = in_channels
        for i, c in enumerate(widths):
            layers += [Conv2d(c_prev, c, 3, stride=2, padding=1, seed=child_seed(seed, i)), Activation("relu")]
            c_prev = c
        layers.append(Conv2d(c_prev, 1, 1, seed=child_seed(seed, len(widths))))
        super().__init__(*layers)

    def forward(self, x):
        x = check_tensor(x)
        if x.shape[2] < MIN_SIZE or x.shape[3] < MIN_SIZE:
            raise ShapeError(f"patch scorer needs at least {MIN_SIZE}x{MIN_SIZE} input, got {x.shape[2:]}")
        return super().forward(x)


def patch_scorer(x, module: PatchScorer):
    return module.forward(x)
