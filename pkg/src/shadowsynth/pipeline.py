"""Batch construction of (shadow-free, shadowed, mask) triplets and manifests."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from ._validation import check_image, check_mask, check_same_hw
from .decay import DecayParams, ParamLibrary, apply_de_exposure, load_library, sample_params
from .image import load_image, load_mask, quantize8, save_image, save_mask
from .masks import GuidedFilterConfig, MaskTooThinError, MorphConfig, core_and_ring, guided_filter
from .rng import derive_seed

logger = logging.getLogger(__name__)

MANIFEST_VERSION = "shadowsynth-manifest/1"
MANIFEST_NAME = "manifest.json"
SUBDIRS = ("free", "shadow", "mask", "soft_mask")


@dataclass(frozen=True)
class PipelineConfig:
    morph: MorphConfig = field(default_factory=MorphConfig)
    guided: GuidedFilterConfig = field(default_factory=GuidedFilterConfig)


def band_excluding_morph(gf_cfg: GuidedFilterConfig, base: MorphConfig | None = None) -> MorphConfig:
    """Morphology whose core and ring stay clear of the guided-filter transition band.

    A guided filter of radius ``r`` changes the mask up to ``2r`` pixels from
    its edge (the fitted slope is itself window-averaged), so SLR measured
    with a core erosion or ring gap below ``2r + 1`` mixes in partially
    shadowed pixels.
    """
    base = base or MorphConfig()
    reach = 2 * gf_cfg.radius + 1
    return MorphConfig(
        core_erode_radius=max(base.core_erode_radius, reach),
        ring_gap=max(base.ring_gap, reach),
        ring_width=base.ring_width,
        split_radius=base.split_radius,
    )


class Triplet(NamedTuple):
    shadowed: np.ndarray
    soft_mask: np.ndarray
    params: DecayParams


def synthesize_triplet(
    free,
    pseudo_mask,
    library: ParamLibrary,
    seed: int,
    gf_cfg: GuidedFilterConfig | None = None,
    refiner: Optional[Callable] = None,
) -> Triplet:
    """Soften the pseudo mask, draw ``(w, b)`` from the library and de-expose.

    ``refiner``, when given, is applied as ``refiner(shadowed, soft_mask)``
    after the physics step (reserved for a learned refinement stage).
    """
    img = check_image(free, "free")
    m = check_mask(pseudo_mask, "pseudo_mask", hard=True)
    check_same_hw(img, m, ("free", "pseudo_mask"))
    soft = guided_filter(img, m, gf_cfg or GuidedFilterConfig())
    params = sample_params(library, seed)
    shadowed = apply_de_exposure(img, soft, params)
    if refiner is not None:
        shadowed = check_image(refiner(shadowed, soft), "refined")
    return Triplet(shadowed, soft, params)


def _list_pngs(directory):
    return sorted(n for n in os.listdir(directory) if n.lower().endswith(".png"))


def _process_item(index, name, free_dir, mask_dir, out_dir, library, global_seed, cfg, refiner):
    item_id = os.path.splitext(name)[0]
    seed = derive_seed(global_seed, index)
    free = load_image(os.path.join(free_dir, name))
    # triplets are stored at 8 bits; synthesize from exactly the stored free image
    free = quantize8(free).astype(np.float64) / 255.0
    mask_path = os.path.join(mask_dir, name)
    if not os.path.exists(mask_path):
        raise FileNotFoundError(f"no mask named {name} in {mask_dir}")
    mask = load_mask(mask_path, hard=True)
    if mask.shape != free.shape[:2]:
        raise ValueError(f"mask size {mask.shape} differs from image size {free.shape[:2]}")
    warnings = []
    try:
        core_and_ring(mask, cfg.morph)
    except (MaskTooThinError, ValueError) as exc:
        warnings.append(str(exc))
    shadowed, soft, params = synthesize_triplet(free, mask, library, seed, cfg.guided, refiner)
    rel = {sub: f"{sub}/{item_id}.png" for sub in SUBDIRS}
    save_image(os.path.join(out_dir, rel["free"]), free)
    save_image(os.path.join(out_dir, rel["shadow"]), shadowed)
    save_mask(os.path.join(out_dir, rel["mask"]), mask)
    save_mask(os.path.join(out_dir, rel["soft_mask"]), soft)
    return {
        "id": item_id,
        "free_path": rel["free"],
        "shadow_path": rel["shadow"],
        "mask_path": rel["mask"],
        "soft_mask_path": rel["soft_mask"],
        "params": {"w": list(params.w), "b": list(params.b)},
        "seed": seed,
        "gf_config": asdict(cfg.guided),
        "warnings": warnings,
    }


def run_batch(
    free_dir,
    mask_dir,
    library_path,
    out_dir,
    global_seed: int,
    cfg: PipelineConfig | None = None,
    jobs: int = 1,
    refiner: Optional[Callable] = None,
) -> dict:
    """Synthesize a triplet for every name-matched image/mask pair.

    Items are indexed by sorted file name; item ``i`` uses seed
    ``derive_seed(global_seed, i)``.  Per-item failures are recorded in the
    manifest and never abort the batch.  The library is loaded before any
    output is written, so a bad library leaves ``out_dir`` untouched.
    """
    cfg = cfg or PipelineConfig()
    library = load_library(library_path)
    if len(library) == 0:
        raise ValueError(f"library {library_path} has no entries")
    names = _list_pngs(free_dir)
    for sub in SUBDIRS:
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)

    def work(item):
        index, name = item
        try:
            return _process_item(index, name, free_dir, mask_dir, out_dir, library, global_seed, cfg, refiner), None
        except (OSError, ValueError) as exc:
            logger.warning("item %s failed: %s", name, exc)
            return None, {"id": os.path.splitext(name)[0], "reason": str(exc)}

    items = list(enumerate(names))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, items))
    else:
        results = [work(it) for it in items]

    manifest = {
        "version": MANIFEST_VERSION,
        "global_seed": int(global_seed),
        "library_path": os.fspath(library_path),
        "morph_config": asdict(cfg.morph),
        "gf_config": asdict(cfg.guided),
        "records": [rec for rec, _ in results if rec is not None],
        "failures": [fail for _, fail in results if fail is not None],
    }
    save_manifest(manifest, os.path.join(out_dir, MANIFEST_NAME))
    return manifest


def save_manifest(manifest: dict, path) -> None:
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def load_manifest(path) -> dict:
    with open(os.fspath(path), encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version {doc.get('version')!r}")
    return doc
