"""Deterministic synthetic rasters: textures, disk masks and matched-statistics fixtures.

Used by the demo command and the test-suite; every generator is a pure
function of its seed.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .image import save_image, save_mask
from .masks import MorphConfig, core_and_ring
from .rng import counter_uniform, derive_seed


def disk_mask(height, width, center, radius) -> np.ndarray:
    cy, cx = center
    yy, xx = np.mgrid[0:height, 0:width]
    return (((yy - cy) ** 2 + (xx - cx) ** 2) <= radius * radius).astype(np.float64)


def tiled_texture(height, width, seed, period=4, low=0.25, high=0.75) -> np.ndarray:
    """Periodic texture: one random ``period x period`` RGB tile repeated."""
    tile = counter_uniform(seed, period * period * 3, low, high).reshape(period, period, 3)
    reps = (math.ceil(height / period), math.ceil(width / period), 1)
    return np.tile(tile, reps)[:height, :width].copy()


def uniform_image(height, width, value) -> np.ndarray:
    return np.broadcast_to(np.asarray(value, dtype=np.float64), (height, width, 3)).copy()


def matched_multiset_fixture(seed, size=64, radius=18, cfg: MorphConfig | None = None, low=0.3, high=0.7):
    """Image whose shadow core holds copies of exactly the lit-ring multiset.

    Core and ring sizes share a factor ``g >= 2``; a random base list of
    ``g`` RGB values is replicated into both regions (shuffled), so their
    per-channel means and population deviations coincide.  Returns
    ``(image, mask, core, ring)``.
    """
    cfg = cfg or MorphConfig()
    for r in range(radius, radius + 20):
        mask = disk_mask(size, size, ((size - 1) / 2, (size - 1) / 2), r)
        core, ring = core_and_ring(mask, cfg)
        n_core, n_ring = int(core.sum()), int(ring.sum())
        g = math.gcd(n_core, n_ring)
        if g >= 2:
            break
    else:
        raise ValueError("could not find a disk with a common region-size factor")
    base = counter_uniform(seed, g * 3, low, high).reshape(g, 3)
    rng = np.random.default_rng(derive_seed(seed, 1))
    image = tiled_texture(size, size, derive_seed(seed, 2), low=low, high=high)
    core_vals = np.tile(base, (n_core // g, 1))
    ring_vals = np.tile(base, (n_ring // g, 1))
    image[core.astype(bool)] = core_vals[rng.permutation(n_core)]
    image[ring.astype(bool)] = ring_vals[rng.permutation(n_ring)]
    return image, mask, core, ring


def write_fixture_corpus(root, count, seed, size=96, radius_range=(22, 34)):
    """Write ``count`` textured shadow-free images and disk masks under ``root``.

    Creates ``root/free/item_XXX.png`` and ``root/masks/item_XXX.png`` and
    returns the two directories.
    """
    free_dir = os.path.join(root, "free")
    mask_dir = os.path.join(root, "masks")
    os.makedirs(free_dir, exist_ok=True)
    os.makedirs(mask_dir, exist_ok=True)
    for i in range(count):
        s = derive_seed(seed, i)
        u = counter_uniform(s, 3)
        img = tiled_texture(size, size, derive_seed(s, 1), period=4 + i % 3, low=0.3, high=0.8)
        r = radius_range[0] + u[0] * (radius_range[1] - radius_range[0])
        margin = r + 12
        cy = margin + u[1] * max(size - 2 * margin, 0)
        cx = margin + u[2] * max(size - 2 * margin, 0)
        name = f"item_{i:03d}.png"
        save_image(os.path.join(free_dir, name), img)
        save_mask(os.path.join(mask_dir, name), disk_mask(size, size, (cy, cx), r))
    return free_dir, mask_dir
