"""Binary mask morphology, region delineation and guided-filter softening."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from ._validation import check_image, check_mask, check_positive_int, check_same_hw
from .image import luminance


class MaskTooThinError(ValueError):
    """Erosion removed every foreground pixel."""


class EmptyRegionError(ValueError):
    """A derived region has no pixels."""


@dataclass(frozen=True)
class MorphConfig:
    """Radii (in pixels) used to carve shadow core, lit ring and umbra/penumbra."""

    core_erode_radius: int = 5
    ring_gap: int = 3
    ring_width: int = 7
    split_radius: int = 7

    def __post_init__(self):
        for name in ("core_erode_radius", "ring_gap", "ring_width", "split_radius"):
            check_positive_int(getattr(self, name), name)


@dataclass(frozen=True)
class GuidedFilterConfig:
    radius: int = 8
    epsilon: float = 1e-3

    def __post_init__(self):
        check_positive_int(self.radius, "radius")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")


def disk(radius: int) -> np.ndarray:
    """Boolean disk structuring element: offsets with ``dy**2 + dx**2 <= radius**2``."""
    r = check_positive_int(radius, "radius")
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return (yy * yy + xx * xx) <= r * r


def morph(mask, radius: int, mode: str = "erode") -> np.ndarray:
    """Flat binary erosion or dilation by a disk; outside the image counts as background."""
    m = check_mask(mask, hard=True).astype(bool)
    se = disk(radius)
    if mode == "erode":
        out = ndimage.binary_erosion(m, structure=se, border_value=0)
    elif mode == "dilate":
        out = ndimage.binary_dilation(m, structure=se, border_value=0)
    else:
        raise ValueError(f"mode must be 'erode' or 'dilate', got {mode!r}")
    return out.astype(np.float64)


def erode(mask, radius: int) -> np.ndarray:
    return morph(mask, radius, "erode")


def dilate(mask, radius: int) -> np.ndarray:
    return morph(mask, radius, "dilate")


def core_and_ring(mask, cfg: MorphConfig | None = None):
    """Shadow core (eroded mask) and the lit ring a little way outside the mask.

    The ring is ``dilate(mask, gap + width)`` minus ``dilate(mask, gap)`` so
    boundary-mixed pixels on either side of the edge are excluded.
    """
    cfg = cfg or MorphConfig()
    m = check_mask(mask, hard=True)
    if not m.any():
        raise EmptyRegionError("mask has no foreground pixels")
    core = erode(m, cfg.core_erode_radius)
    if not core.any():
        raise MaskTooThinError("mask too thin for configured erosion")
    outer = dilate(m, cfg.ring_gap + cfg.ring_width)
    inner = dilate(m, cfg.ring_gap)
    ring = outer * (1.0 - inner)
    return core, ring


class UmbraPenumbra(NamedTuple):
    umbra: np.ndarray
    penumbra: np.ndarray
    umbra_empty: bool


def umbra_penumbra_split(mask, split_radius: int = 7) -> UmbraPenumbra:
    """Split a hard mask into an eroded umbra and the band around its edge.

    ``umbra = erode(mask, r)`` and ``penumbra = dilate(mask, r) \\ umbra``; thin
    masks may leave the umbra empty, which is reported through ``umbra_empty``.
    """
    m = check_mask(mask, hard=True)
    umbra = erode(m, split_radius)
    penumbra = dilate(m, split_radius) * (1.0 - umbra)
    return UmbraPenumbra(umbra, penumbra, not umbra.any())


def box_mean(x, radius: int) -> np.ndarray:
    """Mean over the ``(2r+1)^2`` window clipped to the image (shrinking windows at borders)."""
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape
    r = radius
    c = np.zeros((h + 1, w + 1))
    c[1:, 1:] = x.cumsum(axis=0).cumsum(axis=1)
    y0 = np.clip(np.arange(h) - r, 0, h)
    y1 = np.clip(np.arange(h) + r + 1, 0, h)
    x0 = np.clip(np.arange(w) - r, 0, w)
    x1 = np.clip(np.arange(w) + r + 1, 0, w)
    total = (
        c[y1][:, x1] - c[y0][:, x1] - c[y1][:, x0] + c[y0][:, x0]
    )
    count = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    return total / count


def guided_filter(guide, input_mask, cfg: GuidedFilterConfig | None = None) -> np.ndarray:
    """Gray-guide guided filter of ``input_mask`` steered by the luminance of ``guide``.

    Per window the slope ``a = cov(g, p) / (var(g) + eps)`` is fitted and
    box-averaged; the offset is then taken from the window means,
    ``q = abar g + mean(p) - abar mean(g)``, and the result clamped to
    ``[0, 1]``.  Fixing the offset after averaging the slope (rather than
    averaging a per-window offset too) keeps a flat guide an exact single box
    mean of the input.
    """
    cfg = cfg or GuidedFilterConfig()
    img = check_image(guide, "guide")
    p = check_mask(input_mask, "input")
    check_same_hw(img, p, ("guide", "input"))
    g = luminance(img)
    r, eps = cfg.radius, cfg.epsilon

    mean_g = box_mean(g, r)
    mean_p = box_mean(p, r)
    cov_gp = box_mean(g * p, r) - mean_g * mean_p
    var_g = box_mean(g * g, r) - mean_g * mean_g
    a_bar = box_mean(cov_gp / (var_g + eps), r)
    q = a_bar * g + mean_p - a_bar * mean_g
    return np.clip(q, 0.0, 1.0)
