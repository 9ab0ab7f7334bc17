"""Synthesis and removal objectives with gradients w.r.t. the generated image.

All L1 and expectation terms are element means, so magnitudes do not depend
on resolution.  Images are ``(H, W, 3)`` arrays; functions named ``*_grad``
return ``(value, d value / d generated)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_image, check_mask, check_same_hw, check_same_shape, check_tensor
from .nn.layers import Activation, Conv2d, Sequential, child_seed

DEFAULT_EPS = 1e-6


@dataclass(frozen=True)
class PdssLossConfig:
    lambda_cyc: float = 10.0
    lambda_back: float = 10.0
    lambda_idt: float = 5.0

    def __post_init__(self):
        if min(self.lambda_cyc, self.lambda_back, self.lambda_idt) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class PcdsLossConfig:
    lambda_color: float = 200.0
    lambda_phy: float = 10.0
    lambda_l1: float = 80.0
    lambda_per: float = 7.0
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if min(self.lambda_color, self.lambda_phy, self.lambda_l1, self.lambda_per) < 0:
            raise ValueError("loss weights must be non-negative")
        if not self.eps > 0:
            raise ValueError("eps must be positive")


def _pair(a, b, names):
    a = check_image(a, names[0])
    b = check_image(b, names[1])
    check_same_shape(a, b, names)
    return a, b


def _l1(a, b):
    return float(np.abs(a - b).mean())


# -- synthesis objectives --------------------------------------------------


def lsgan_terms(real_scores, fake_scores):
    """Least-squares adversarial terms ``(d_loss, g_loss)``.

    ``d_loss = mean((real - 1)^2) + mean(fake^2)`` and the generator side is
    ``g_loss = mean((fake - 1)^2)``.
    """
    real = np.asarray(real_scores, dtype=np.float64)
    fake = np.asarray(fake_scores, dtype=np.float64)
    if not (np.all(np.isfinite(real)) and np.all(np.isfinite(fake))):
        raise ValueError("score maps must be finite")
    d_loss = float(((real - 1.0) ** 2).mean() + (fake**2).mean())
    g_loss = float(((fake - 1.0) ** 2).mean())
    return d_loss, g_loss


def cycle_loss(recon_a, orig_a, recon_b, orig_b) -> float:
    ra, oa = _pair(recon_a, orig_a, ("recon_a", "orig_a"))
    rb, ob = _pair(recon_b, orig_b, ("recon_b", "orig_b"))
    return _l1(ra, oa) + _l1(rb, ob)


def background_loss(de_exposed, generated, mask) -> float:
    """Mean of ``|(I_ds - I_gs) * (1 - mask)|`` over every pixel and channel."""
    ds, gs = _pair(de_exposed, generated, ("de_exposed", "generated"))
    m = check_mask(mask)
    check_same_hw(ds, m, ("images", "mask"))
    return float(np.abs((ds - gs) * (1.0 - m)[:, :, None]).mean())


def identity_loss(generated_from_real, real) -> float:
    return _l1(*_pair(generated_from_real, real, ("generated_from_real", "real")))


def pdss_total(adv, cyc, back, idt, cfg: PdssLossConfig | None = None) -> float:
    cfg = cfg or PdssLossConfig()
    return float(adv + cfg.lambda_cyc * cyc + cfg.lambda_back * back + cfg.lambda_idt * idt)


# -- removal objectives ----------------------------------------------------


class IdentityExtractor:
    """Single feature level equal to the image itself."""

    def __call__(self, image):
        return [check_image(image)]

    def backward(self, grads):
        return grads[0]


class RandomConvExtractor:
    """Seeded stack of three 3x3 conv+ReLU layers; each layer output is one level.

    Stands in for a pretrained perceptual network wherever one is not
    available; any object with ``__call__`` (and optionally ``backward``)
    producing a list of arrays can be used instead.
    """

    def __init__(self, widths=(8, 8, 8), seed=0):
        self.layers = []
        c_prev = 3
        for i, c in enumerate(widths):
            self.layers.append(
                Sequential(Conv2d(c_prev, c, 3, padding=1, seed=child_seed(seed, i)), Activation("relu"))
            )
            c_prev = c

    def __call__(self, image):
        x = check_image(image).transpose(2, 0, 1)[None]
        feats = []
        for layer in self.layers:
            x = layer.forward(x)
            feats.append(x)
        return feats

    def backward(self, grads):
        g = None
        for i in reversed(range(len(self.layers))):
            g = grads[i] if g is None else grads[i] + g
            g = self.layers[i].backward(g)
        return g[0].transpose(1, 2, 0)


def _features(fx, image):
    feats = fx(image)
    return [np.asarray(f, dtype=np.float64) for f in feats]


def rec_loss_grad(restored, target, fx=None, cfg: PcdsLossConfig | None = None):
    """Pixel L1 plus feature L1 and its gradient w.r.t. ``restored``.

    The gradient needs ``fx.backward`` (supported by the shipped extractors);
    the target's features are treated as constants.
    """
    cfg = cfg or PcdsLossConfig()
    fx = fx or IdentityExtractor()
    sr, sf = _pair(restored, target, ("restored", "target"))
    target_feats = _features(fx, sf)
    feats = _features(fx, sr)
    if len(feats) != len(target_feats) or any(a.shape != b.shape for a, b in zip(feats, target_feats)):
        raise ValueError("feature extractor produced mismatched outputs for the two images")
    value = cfg.lambda_l1 * _l1(sr, sf)
    grad = cfg.lambda_l1 * np.sign(sr - sf) / sr.size
    feat_grads = []
    for a, b in zip(feats, target_feats):
        value += cfg.lambda_per * _l1(a, b)
        feat_grads.append(cfg.lambda_per * np.sign(a - b) / a.size)
    if hasattr(fx, "backward"):
        grad = grad + fx.backward(feat_grads)
    else:
        grad = None
    return float(value), grad


def rec_loss(restored, target, fx=None, cfg: PcdsLossConfig | None = None) -> float:
    cfg = cfg or PcdsLossConfig()
    fx = fx or IdentityExtractor()
    sr, sf = _pair(restored, target, ("restored", "target"))
    fa, fb = _features(fx, sr), _features(fx, sf)
    if len(fa) != len(fb) or any(a.shape != b.shape for a, b in zip(fa, fb)):
        raise ValueError("feature extractor produced mismatched outputs for the two images")
    return float(cfg.lambda_l1 * _l1(sr, sf) + cfg.lambda_per * sum(_l1(a, b) for a, b in zip(fa, fb)))


def chroma_ratios(image, eps=DEFAULT_EPS):
    img = check_image(image)
    return img / (img.sum(axis=2, keepdims=True) + eps)


def color_loss_grad(restored, target, eps=DEFAULT_EPS):
    """Per-pixel L1 distance between channel-ratio vectors, averaged over pixels."""
    sr, sf = _pair(restored, target, ("restored", "target"))
    denom = sr.sum(axis=2, keepdims=True) + eps
    r_sr = sr / denom
    diff = r_sr - chroma_ratios(sf, eps)
    n = sr.shape[0] * sr.shape[1]
    value = float(np.abs(diff).sum() / n)
    s = np.sign(diff)
    grad = (s - (s * r_sr).sum(axis=2, keepdims=True)) / denom / n
    return value, grad


def color_loss(restored, target, eps=DEFAULT_EPS) -> float:
    return color_loss_grad(restored, target, eps)[0]


def forward_diff(x):
    """Forward differences ``(dx, dy)`` over the valid positions only."""
    return x[:, 1:] - x[:, :-1], x[1:, :] - x[:-1, :]


def total_variation(image) -> float:
    gx, gy = forward_diff(check_image(image))
    return float(np.abs(gx).mean() + np.abs(gy).mean())


def phy_loss_grad(shadow, restored, penumbra, eps=DEFAULT_EPS):
    """Retinex smoothness outside the penumbra plus texture TV inside it.

    ``L = shadow / (restored + eps)``; the loss is the mean absolute forward
    difference of ``L`` weighted by ``1 - penumbra`` plus the same for
    ``restored`` weighted by ``penumbra``.  Means run over the valid
    difference positions (``H x (W-1)`` for x, ``(H-1) x W`` for y); the mask
    weight is taken at the left/top pixel of each difference.
    """
    s, sr = _pair(shadow, restored, ("shadow", "restored"))
    m = check_mask(penumbra, "penumbra")
    check_same_hw(s, m, ("images", "penumbra"))
    m3 = m[:, :, None]
    illum = s / (sr + eps)
    lx, ly = forward_diff(illum)
    rx, ry = forward_diff(sr)
    wx_out, wy_out = (1.0 - m3)[:, :-1], (1.0 - m3)[:-1, :]
    wx_in, wy_in = m3[:, :-1], m3[:-1, :]
    nx, ny = lx.size, ly.size
    value = (
        np.abs(lx * wx_out).sum() / nx
        + np.abs(ly * wy_out).sum() / ny
        + np.abs(rx * wx_in).sum() / nx
        + np.abs(ry * wy_in).sum() / ny
    )

    def diff_adjoint(gx, gy):
        # adjoint of forward_diff: scatter +g to the later pixel and -g to the earlier one
        out = np.zeros_like(sr)
        out[:, 1:] += gx
        out[:, :-1] -= gx
        out[1:, :] += gy
        out[:-1, :] -= gy
        return out

    d_illum = diff_adjoint(np.sign(lx) * wx_out / nx, np.sign(ly) * wy_out / ny)
    d_sr = diff_adjoint(np.sign(rx) * wx_in / nx, np.sign(ry) * wy_in / ny)
    grad = d_sr - d_illum * s / (sr + eps) ** 2
    return float(value), grad


def phy_loss(shadow, restored, penumbra, eps=DEFAULT_EPS) -> float:
    return phy_loss_grad(shadow, restored, penumbra, eps)[0]


def pcds_total(adv, rec, color, phy, cfg: PcdsLossConfig | None = None) -> float:
    cfg = cfg or PcdsLossConfig()
    return float(adv + rec + cfg.lambda_color * color + cfg.lambda_phy * phy)


def adversarial_from_scorer(scorer, real_image, fake_image):
    """``lsgan_terms`` on the score maps of ``scorer`` for two images."""
    real = scorer.forward(check_tensor(check_image(real_image).transpose(2, 0, 1)[None]))
    fake = scorer.forward(check_tensor(check_image(fake_image).transpose(2, 0, 1)[None]))
    return lsgan_terms(real, fake)
