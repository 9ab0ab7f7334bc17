"""Shadow synthesis statistics (SLR, delta-a) and restoration quality metrics.

Masked variants take a mask whose pixels ``>= 0.5`` select the region.
PSNR returns ``math.inf`` for identical inputs and SLR returns ``math.nan``
when the lit mean is zero; report serialization turns these into the
``"infinite"`` / ``"undefined"`` sentinels.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._validation import ShapeError, check_image, check_mask, check_same_hw, check_same_shape
from .image import load_image, load_mask, luminance, rgb_to_lab
from .masks import EmptyRegionError, MorphConfig, core_and_ring

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

INFINITE = "infinite"
UNDEFINED = "undefined"


def _region(mask, shape, name="mask"):
    m = check_mask(mask, name)
    if m.shape != shape:
        raise ShapeError(f"{name} shape {m.shape} does not match image {shape}")
    sel = m >= 0.5
    if not sel.any():
        raise EmptyRegionError(f"{name} selects no pixels")
    return sel


def slr(image, mask, cfg: MorphConfig | None = None) -> float:
    """Mean luminance of the shadow core over mean luminance of the lit ring."""
    img = check_image(image)
    m = check_mask(mask, hard=True)
    check_same_hw(img, m, ("image", "mask"))
    core, ring = core_and_ring(m, cfg or MorphConfig())
    if not ring.any():
        raise EmptyRegionError("lit ring is empty")
    y = luminance(img)
    lit = y[ring.astype(bool)].mean()
    if lit == 0.0:
        return math.nan
    return float(y[core.astype(bool)].mean() / lit)


def delta_a(before, after, mask) -> float:
    """Mean change of the CIELab a* component over the masked pixels."""
    b0 = check_image(before, "before")
    b1 = check_image(after, "after")
    check_same_shape(b0, b1, ("before", "after"))
    sel = _region(mask, b0.shape[:2])
    da = rgb_to_lab(b1)[..., 1] - rgb_to_lab(b0)[..., 1]
    return float(da[sel].mean())


def _mse(pred, gt, mask):
    p = check_image(pred, "pred")
    g = check_image(gt, "gt")
    check_same_shape(p, g, ("pred", "gt"))
    diff2 = (p - g) ** 2
    if mask is not None:
        diff2 = diff2[_region(mask, p.shape[:2])]
    return float(diff2.mean())


def psnr(pred, gt, mask=None) -> float:
    """PSNR in dB with unit peak; ``inf`` when the inputs coincide."""
    mse = _mse(pred, gt, mask)
    if mse == 0.0:
        return math.inf
    return float(10.0 * math.log10(1.0 / mse))


def rmse(pred, gt, mask=None, scale: float = 255.0) -> float:
    """Root mean squared error reported on a ``0..scale`` intensity scale."""
    return float(scale * math.sqrt(_mse(pred, gt, mask)))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def _filter_valid(x, win):
    from numpy.lib.stride_tricks import sliding_window_view

    k = win.shape[0]
    views = sliding_window_view(x, (k, k))
    return np.einsum("ijkl,kl->ij", views, win)


def ssim_map(pred, gt) -> np.ndarray:
    """Luminance SSIM map over every fully contained 11x11 Gaussian window.

    The map has shape ``(H - 10, W - 10)``; entry ``(i, j)`` belongs to the
    window centred on pixel ``(i + 5, j + 5)``.
    """
    p = check_image(pred, "pred")
    g = check_image(gt, "gt")
    check_same_shape(p, g, ("pred", "gt"))
    if p.shape[0] < SSIM_WINDOW or p.shape[1] < SSIM_WINDOW:
        raise ShapeError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {p.shape[:2]}")
    x, y = luminance(p), luminance(g)
    win = gaussian_window()
    c1, c2 = SSIM_K1**2, SSIM_K2**2
    mx, my = _filter_valid(x, win), _filter_valid(y, win)
    sxx = _filter_valid(x * x, win) - mx * mx
    syy = _filter_valid(y * y, win) - my * my
    sxy = _filter_valid(x * y, win) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return num / den


def ssim(pred, gt, mask=None) -> float:
    """Mean of the SSIM map, optionally restricted to window centres inside ``mask``."""
    smap = ssim_map(pred, gt)
    if mask is None:
        return float(smap.mean())
    h = SSIM_WINDOW // 2
    sel = _region(mask, np.shape(pred)[:2])[h:-h, h:-h]
    if not sel.any():
        raise EmptyRegionError("mask selects no SSIM window centres")
    return float(smap[sel].mean())


def entropy(image) -> float:
    """Shannon entropy (bits) of the 256-bin histogram of 8-bit luminance."""
    y = luminance(image)
    levels = np.floor(np.clip(y, 0.0, 1.0) * 255.0 + 0.5).astype(np.int64)
    counts = np.bincount(levels.ravel(), minlength=256).astype(np.float64)
    p = counts[counts > 0] / counts.sum()
    h = float(-(p * np.log2(p)).sum())
    return max(h, 0.0)


# -- reports ---------------------------------------------------------------


def to_json_scalar(value):
    if value is None:
        return None
    if isinstance(value, float) and math.isnan(value):
        return UNDEFINED
    if isinstance(value, float) and math.isinf(value):
        return INFINITE
    return value


def _aggregate(values, percentile=None):
    vals = [v for v in values if v is not None and math.isfinite(v)]
    if not vals:
        return None, None, None
    arr = np.array(vals)
    if percentile is None:
        lo, hi = float(arr.min()), float(arr.max())
    else:
        tail = (100.0 - percentile) / 2.0
        lo, hi = (float(v) for v in np.percentile(arr, [tail, 100.0 - tail]))
    return float(arr.mean()), lo, hi


def _synthesis_item(root, record, cfg):
    free = load_image(os.path.join(root, record["free_path"]))
    shadow = load_image(os.path.join(root, record["shadow_path"]))
    mask = load_mask(os.path.join(root, record["mask_path"]), hard=True)
    return {
        "id": record["id"],
        "slr": slr(shadow, mask, cfg),
        "delta_a": delta_a(free, shadow, mask),
        "entropy": entropy(shadow),
    }


def dataset_stats(manifest, cfg: MorphConfig | None = None, root=".", percentile=None, jobs=1) -> dict:
    """Per-item SLR, delta-a and entropy of a synthesized dataset plus aggregates.

    ``manifest`` is the manifest dict (paths relative to ``root``).  Items
    that fail to load or evaluate are listed under ``failures``; aggregates use
    the successful items only.  ``slr_range`` is min/max unless ``percentile``
    ``p`` in ``(0, 100]`` is given, in which case it is the central ``p``
    percent interval (``p = 90`` reports the 5th and 95th percentiles).
    """
    if percentile is not None and not 0.0 < percentile <= 100.0:
        raise ValueError(f"percentile must lie in (0, 100], got {percentile}")
    cfg = cfg or MorphConfig()
    records = list(manifest["records"])

    def run(record):
        try:
            return _synthesis_item(root, record, cfg), None
        except (OSError, ValueError) as exc:
            return None, (record["id"], str(exc))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, records))
    else:
        results = [run(r) for r in records]

    items = [item for item, _ in results if item is not None]
    failures = [fail for _, fail in results if fail is not None]
    mean_slr, lo, hi = _aggregate([it["slr"] for it in items], percentile)
    mean_da, _, _ = _aggregate([it["delta_a"] for it in items])
    mean_ent, _, _ = _aggregate([it["entropy"] for it in items])
    return {
        "config": {
            "core_erode_radius": cfg.core_erode_radius,
            "ring_gap": cfg.ring_gap,
            "ring_width": cfg.ring_width,
            "slr_range": "minmax" if percentile is None else f"percentile:{percentile}",
            "luminance": "bt601-luma",
        },
        "items": items,
        "aggregates": {
            "count": len(items),
            "mean_slr": mean_slr,
            "slr_range": [lo, hi],
            "mean_delta_a": mean_da,
            "mean_entropy": mean_ent,
        },
        "failures": [{"id": i, "reason": r} for i, r in failures],
    }


def restoration_item(pred, gt, mask, item_id="") -> dict:
    """Shadow-region full-reference metrics plus no-reference entropy for one pair."""
    return {
        "id": item_id,
        "psnr_s": psnr(pred, gt, mask),
        "ssim_s": ssim(pred, gt, mask),
        "rmse_s": rmse(pred, gt, mask),
        "psnr": psnr(pred, gt),
        "ssim": ssim(pred, gt),
        "rmse": rmse(pred, gt),
        "entropy": entropy(pred),
    }


def restoration_aggregates(items) -> dict:
    out = {"count": len(items)}
    for key in ("psnr_s", "ssim_s", "rmse_s", "psnr", "ssim", "rmse", "entropy"):
        vals = [it[key] for it in items]
        finite = [v for v in vals if math.isfinite(v)]
        out[f"mean_{key}"] = float(np.mean(finite)) if finite else None
    return out


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    return to_json_scalar(obj)


def save_report(report: dict, path) -> None:
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        json.dump(_sanitize(report), fh, indent=1)
        fh.write("\n")


def dumps_report(report: dict) -> str:
    return json.dumps(_sanitize(report), indent=1)
