"""Spatial-decay coordinate attention and attentional feature fusion."""

from __future__ import annotations

import numpy as np

from .._validation import ShapeError, check_tensor
from ..nn import functional as F
from ..nn.layers import Activation, BatchNorm2d, Conv2d, Module, Sequential, child_seed

SDCA_REDUCTION = 32


def sdca_width(channels: int, reduction: int = SDCA_REDUCTION) -> int:
    return max(8, channels // reduction)


class StripConvDW(Conv2d):
    """Depthwise ``5x1`` convolution, one filter per channel, padding ``(2, 0)``."""

    def __init__(self, channels, seed=0):
        super().__init__(channels, channels, (5, 1), padding=(2, 0), groups=channels, seed=seed)

    def forward(self, x):
        out, self._cache = F.strip_conv_dw_forward(x, self.params["weight"], self.params["bias"])
        return out


class SDCA(Module):
    """Coordinate attention with a local 1x1 branch and a strip-conv decay branch.

    ``forward`` returns ``(F', A_h, A_w)`` where ``A_h`` has shape
    ``(N, C, H, 1)`` and ``A_w`` shape ``(N, C, 1, W)``; both broadcast over
    the feature map and ``F' = F * A_h * A_w``.
    """

    def __init__(self, channels, seed=0, reduction=SDCA_REDUCTION):
        super().__init__()
        self.channels = channels
        m = sdca_width(channels, reduction)
        self.width = m
        self.local = Conv2d(channels, m, 1, seed=child_seed(seed, 0))
        self.reduce = Conv2d(channels, m, 1, seed=child_seed(seed, 1))
        self.strip = StripConvDW(m, seed=child_seed(seed, 2))
        self.act = Activation("h_swish")
        self.bn = BatchNorm2d(m)
        self.conv_h = Conv2d(m, channels, 1, seed=child_seed(seed, 3))
        self.conv_w = Conv2d(m, channels, 1, seed=child_seed(seed, 4))
        self._cache = None

    def forward(self, feat):
        feat = check_tensor(feat, "F")
        if feat.shape[1] != self.channels:
            raise ShapeError(f"SDCA built for {self.channels} channels, got {feat.shape[1]}")
        h = feat.shape[2]
        x_h, pool_h = F.pool_forward(feat, "avg_over_W")  # (N, C, H, 1)
        x_w, pool_w = F.pool_forward(feat, "avg_over_H")  # (N, C, 1, W)
        y = np.concatenate([x_h, x_w.transpose(0, 1, 3, 2)], axis=2)

        y_local = self.local.forward(y)
        y_decay = self.strip.forward(self.reduce.forward(y))
        y_fused = self.bn.forward(self.act.forward(y_local + y_decay))

        y_h = y_fused[:, :, :h]
        y_w = y_fused[:, :, h:].transpose(0, 1, 3, 2)
        a_h = F.sigmoid(self.conv_h.forward(y_h))
        a_w = F.sigmoid(self.conv_w.forward(y_w))
        self._cache = (feat, a_h, a_w, pool_h, pool_w)
        return feat * a_h * a_w, a_h, a_w

    def backward(self, dout):
        feat, a_h, a_w, pool_h, pool_w = self._cache
        h = feat.shape[2]
        dfeat = dout * a_h * a_w
        da_h = (dout * feat * a_w).sum(axis=3, keepdims=True)
        da_w = (dout * feat * a_h).sum(axis=2, keepdims=True)
        dy_h = self.conv_h.backward(da_h * a_h * (1.0 - a_h))
        dy_w = self.conv_w.backward(da_w * a_w * (1.0 - a_w))
        dy_fused = np.concatenate([dy_h, dy_w.transpose(0, 1, 3, 2)], axis=2)

        ds = self.act.backward(self.bn.backward(dy_fused))
        dy = self.local.backward(ds) + self.reduce.backward(self.strip.backward(ds))
        dfeat += F.pool_backward(dy[:, :, :h], pool_h)
        dfeat += F.pool_backward(dy[:, :, h:].transpose(0, 1, 3, 2), pool_w)
        return dfeat


def sdca_forward(feat, module: SDCA):
    return module.forward(feat)


def aff_width(channels: int) -> int:
    return max(4, channels // 4)


def _context_path(channels, inter, seed):
    return Sequential(
        Conv2d(channels, inter, 1, seed=child_seed(seed, 0)),
        BatchNorm2d(inter),
        Activation("relu"),
        Conv2d(inter, channels, 1, seed=child_seed(seed, 1)),
    )


class AFF(Module):
    """Attentional fusion of two equally shaped streams.

    ``W = sigmoid(local(X) + global(GAP(X)))`` with ``X = Fu + Fp`` and the
    output is ``Fu * W + Fp * (1 - W)``.  ``forward`` returns ``(fused, W)``.
    """

    def __init__(self, channels, seed=0):
        super().__init__()
        self.channels = channels
        inter = aff_width(channels)
        self.local = _context_path(channels, inter, child_seed(seed, 0))
        self.glob = _context_path(channels, inter, child_seed(seed, 1))
        self._cache = None

    def forward(self, fu, fp):
        fu = check_tensor(fu, "Fu")
        fp = check_tensor(fp, "Fp")
        if fu.shape != fp.shape:
            raise ShapeError(f"AFF streams differ in shape: {fu.shape} vs {fp.shape}")
        if fu.shape[1] != self.channels:
            raise ShapeError(f"AFF built for {self.channels} channels, got {fu.shape[1]}")
        x = fu + fp
        gap, gap_cache = F.pool_forward(x, "global_avg")
        weight = F.sigmoid(self.local.forward(x) + self.glob.forward(gap))
        diff = fu - fp
        # fp + W (fu - fp) equals Fu*W + Fp*(1-W) and is exact when the streams agree
        fused = fp + weight * diff
        # rounding guard: keep the convex combination inside the stream envelope
        fused = np.clip(fused, np.minimum(fu, fp), np.maximum(fu, fp))
        self._cache = (weight, diff, gap_cache)
        return fused, weight

    def backward(self, dout):
        weight, diff, gap_cache = self._cache
        dz = dout * diff * weight * (1.0 - weight)
        dx = self.local.backward(dz)
        dx = dx + F.pool_backward(self.glob.backward(dz.sum(axis=(2, 3), keepdims=True)), gap_cache)
        return dout * weight + dx, dout * (1.0 - weight) + dx


def aff_fuse(fu, fp, module: AFF):
    return module.forward(fu, fp)
