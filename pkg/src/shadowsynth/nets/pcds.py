"""Two-stream umbra/penumbra encoder, fusion, semantic aggregation and cascaded decoder.

Toy-scale geometry: four encoder stages of widths 16/32/64/128, each a
stride-2 3x3 convolution followed by ReLU.  The penumbra stream uses dilated
kernels (1/2/4/8 by default).  Inputs must have H and W divisible by 16.
"""

from __future__ import annotations

import numpy as np

from .._validation import ShapeError, check_image, check_mask, check_same_hw, check_tensor
from ..masks import umbra_penumbra_split
from ..nn import functional as F
from ..nn.layers import Activation, Conv2d, Module, Sequential, Upsample, child_seed
from .attention import AFF

TOY_WIDTHS = (16, 32, 64, 128)
PENUMBRA_DILATIONS = (1, 2, 4, 8)
UMBRA_DILATIONS = (1, 1, 1, 1)
SA_DILATIONS = (1, 2, 4)


def image_to_tensor(image) -> np.ndarray:
    return check_image(image).transpose(2, 0, 1)[None].copy()


def tensor_to_image(x) -> np.ndarray:
    x = check_tensor(x)
    if x.shape[0] != 1 or x.shape[1] != 3:
        raise ShapeError(f"expected a (1, 3, H, W) tensor, got {x.shape}")
    return x[0].transpose(1, 2, 0).copy()


def mask_to_tensor(mask) -> np.ndarray:
    return check_mask(mask)[None, None].copy()


class StreamEncoder(Module):
    """Four stride-2 conv+ReLU stages; stage 1 sees ``[image, stream mask]``."""

    def __init__(self, in_channels=4, widths=TOY_WIDTHS, dilations=UMBRA_DILATIONS, seed=0):
        super().__init__()
        if len(widths) != len(dilations):
            raise ValueError("widths and dilations must have equal length")
        self.widths = tuple(widths)
        self.dilations = tuple(dilations)
        self.stages = []
        c_prev = in_channels
        for i, (c, d) in enumerate(zip(widths, dilations)):
            block = Sequential(
                Conv2d(c_prev, c, 3, stride=2, padding=d, dilation=d, seed=child_seed(seed, i)),
                Activation("relu"),
            )
            setattr(self, f"stage{i + 1}", block)
            self.stages.append(block)
            c_prev = c

    def forward(self, x):
        x = check_tensor(x)
        depth = 2 ** len(self.stages)
        if x.shape[2] % depth or x.shape[3] % depth:
            raise ShapeError(f"spatial size {x.shape[2:]} must be a multiple of {depth}")
        feats = []
        for block in self.stages:
            x = block.forward(x)
            feats.append(x)
        return feats

    def backward(self, dfeats):
        grad = None
        for i in reversed(range(len(self.stages))):
            g = dfeats[i] if grad is None else dfeats[i] + grad
            grad = self.stages[i].backward(g)
        return grad


def encoder_forward(x, module: StreamEncoder):
    return module.forward(x)


class SemanticAggregation(Module):
    """``x + proj(relu(sum_d conv_d(x)))`` over parallel dilated 3x3 convolutions."""

    def __init__(self, channels, dilations=SA_DILATIONS, seed=0):
        super().__init__()
        self.branches = []
        for i, d in enumerate(dilations):
            conv = Conv2d(channels, channels, 3, padding=d, dilation=d, seed=child_seed(seed, i))
            setattr(self, f"branch{i}", conv)
            self.branches.append(conv)
        self.act = Activation("relu")
        self.proj = Conv2d(channels, channels, 1, seed=child_seed(seed, len(dilations)))

    def forward(self, x):
        x = check_tensor(x)
        s = sum(b.forward(x) for b in self.branches)
        return x + self.proj.forward(self.act.forward(s))

    def backward(self, dout):
        ds = self.act.backward(self.proj.backward(dout))
        return dout + sum(b.backward(ds) for b in self.branches)


def sa_forward(x, module: SemanticAggregation):
    return module.forward(x)


class CascadeDecoder(Module):
    """Cascaded refinement from the bottleneck up to full resolution.

    Stage ``k`` (1..4) concatenates the running feature with fusion level
    ``5 - k`` at the same resolution, applies two 3x3 conv+ReLU layers and
    upsamples by 2.  A 1x1 head and sigmoid produce the RGB output.
    """

    def __init__(self, widths=TOY_WIDTHS, out_channels=3, seed=0):
        super().__init__()
        self.widths = tuple(widths)
        n = len(widths)
        self.stages = []
        c_run = widths[-1]
        for k in range(1, n + 1):
            c_fuse = widths[n - k]
            c_out = widths[max(n - k - 1, 0)]
            block = Sequential(
                Conv2d(c_run + c_fuse, c_out, 3, padding=1, seed=child_seed(seed, 2 * k)),
                Activation("relu"),
                Conv2d(c_out, c_out, 3, padding=1, seed=child_seed(seed, 2 * k + 1)),
                Activation("relu"),
                Upsample(2),
            )
            setattr(self, f"stage{k}", block)
            self.stages.append(block)
            c_run = c_out
        self.head = Conv2d(c_run, out_channels, 1, seed=child_seed(seed, 1))
        self._cache = None

    def forward(self, fsem, fusions):
        fsem = check_tensor(fsem, "Fsem")
        n = len(self.stages)
        if len(fusions) != n:
            raise ShapeError(f"expected {n} fusion levels, got {len(fusions)}")
        x = fsem
        splits = []
        for k, block in enumerate(self.stages, start=1):
            f = fusions[n - k]
            if f.shape[0] != x.shape[0] or f.shape[2:] != x.shape[2:]:
                raise ShapeError(f"fusion level {n - k + 1} has shape {f.shape}, decoder expects spatial {x.shape[2:]}")
            splits.append(x.shape[1])
            x = block.forward(np.concatenate([x, f], axis=1))
        out = F.sigmoid(self.head.forward(x))
        self._cache = (splits, out)
        return out

    def backward(self, dout):
        splits, out = self._cache
        n = len(self.stages)
        grad = self.head.backward(dout * out * (1.0 - out))
        dfusions = [None] * n
        for k in range(n, 0, -1):
            g = self.stages[k - 1].backward(grad)
            c = splits[k - 1]
            grad = g[:, :c]
            dfusions[n - k] = g[:, c:]
        return grad, dfusions


def cascade_decode(fsem, fusions, module: CascadeDecoder):
    return module.forward(fsem, fusions)


class PCDSNet(Module):
    """Penumbra-aware two-stream deshadowing network at toy scale.

    ``forward`` takes a ``(N, 3, H, W)`` shadow image and ``(N, 1, H, W)``
    umbra and penumbra masks; ``backward`` returns the image gradient.
    """

    def __init__(self, widths=TOY_WIDTHS, penumbra_dilations=PENUMBRA_DILATIONS, seed=0):
        super().__init__()
        self.widths = tuple(widths)
        self.umbra_encoder = StreamEncoder(4, widths, (1,) * len(widths), seed=child_seed(seed, 0))
        self.penumbra_encoder = StreamEncoder(4, widths, penumbra_dilations, seed=child_seed(seed, 1))
        self.fusers = []
        for i, c in enumerate(widths):
            aff = AFF(c, seed=child_seed(seed, 10 + i))
            setattr(self, f"aff{i + 1}", aff)
            self.fusers.append(aff)
        self.sa = SemanticAggregation(widths[-1], seed=child_seed(seed, 2))
        self.decoder = CascadeDecoder(widths, seed=child_seed(seed, 3))

    def forward(self, image, umbra, penumbra):
        image = check_tensor(image, "image")
        fu = self.umbra_encoder.forward(np.concatenate([image, check_tensor(umbra, "umbra")], axis=1))
        fp = self.penumbra_encoder.forward(np.concatenate([image, check_tensor(penumbra, "penumbra")], axis=1))
        fusions = [aff.forward(a, b)[0] for aff, a, b in zip(self.fusers, fu, fp)]
        fsem = self.sa.forward(fusions[-1])
        return self.decoder.forward(fsem, fusions)

    def backward(self, dout):
        dsem, dfusions = self.decoder.backward(dout)
        dfusions[-1] = dfusions[-1] + self.sa.backward(dsem)
        dfu, dfp = zip(*(aff.backward(g) for aff, g in zip(self.fusers, dfusions)))
        dxu = self.umbra_encoder.backward(list(dfu))
        dxp = self.penumbra_encoder.backward(list(dfp))
        return dxu[:, :3] + dxp[:, :3]


def pcds_forward(image, mask, net: PCDSNet, split_radius: int = 7) -> np.ndarray:
    """Restore a shadow image given its hard mask; returns an ``(H, W, 3)`` image in ``[0, 1]``."""
    img = check_image(image)
    m = check_mask(mask, hard=True)
    check_same_hw(img, m, ("image", "mask"))
    split = umbra_penumbra_split(m, split_radius)
    out = net.forward(image_to_tensor(img), mask_to_tensor(split.umbra), mask_to_tensor(split.penumbra))
    return tensor_to_image(out)
