"""Illumination decay model: estimation, parameter library and de-exposure.

Shadowed pixels are modelled channel-wise as ``w * lit + b``.  ``(w, b)`` is
recovered from moment matching between a shadow core and the lit ring around
it, collected into a library, and re-applied to shadow-free images under a
soft mask to synthesize an initial shadow.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from ._validation import check_image, check_mask, check_same_hw
from .image import clip_unit
from .masks import MorphConfig, core_and_ring
from .rng import uniform_index

logger = logging.getLogger(__name__)

LIBRARY_VERSION = "shadowsynth-decay-library/1"
MIN_REGION_PIXELS = 16
MIN_LIT_STD = 1e-6
# accepted range for library entries; anything else is an estimation failure
W_MAX = 2.0
B_ABS_MAX = 1.0


class UnidentifiableScaleError(ValueError):
    """The lit region is flat, so ``w = std_core / std_lit`` is undefined."""


class LibraryFormatError(ValueError):
    """A parameter library file violates the schema or the entry invariants."""


@dataclass(frozen=True)
class RegionStats:
    mean: np.ndarray
    std: np.ndarray
    pixel_count: int


@dataclass(frozen=True)
class DecayParams:
    """Per-channel scale ``w`` and bias ``b`` of the linear degradation."""

    w: tuple
    b: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.w)
        b = tuple(float(v) for v in self.b)
        if len(w) != 3 or len(b) != 3:
            raise ValueError("w and b must have three components")
        if not all(math.isfinite(v) for v in w + b):
            raise ValueError(f"non-finite decay parameters: w={w}, b={b}")
        if not all(v > 0 for v in w):
            raise ValueError(f"w must be > 0 componentwise, got {w}")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", b)

    @property
    def w_array(self):
        return np.array(self.w)

    @property
    def b_array(self):
        return np.array(self.b)

    def is_plausible(self) -> bool:
        return all(0 < v <= W_MAX for v in self.w) and all(abs(v) <= B_ABS_MAX for v in self.b)


@dataclass(frozen=True)
class ParamLibrary:
    entries: tuple = ()
    sources: tuple = ()
    version: str = LIBRARY_VERSION

    def __post_init__(self):
        entries = tuple(self.entries)
        sources = tuple(self.sources) if self.sources else tuple(f"entry-{i}" for i in range(len(entries)))
        if len(sources) != len(entries):
            raise ValueError("sources and entries differ in length")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "sources", tuple(str(s) for s in sources))

    def __len__(self):
        return len(self.entries)


def region_stats(image, region, min_pixels: int = MIN_REGION_PIXELS) -> RegionStats:
    """Per-channel population mean and standard deviation over a hard region."""
    img = check_image(image)
    reg = check_mask(region, "region", hard=True)
    check_same_hw(img, reg, ("image", "region"))
    pixels = img[reg.astype(bool)]
    n = pixels.shape[0]
    if n < min_pixels:
        raise ValueError(f"region has {n} pixels, need at least {min_pixels}")
    mean = pixels.mean(axis=0)
    std = np.sqrt(((pixels - mean) ** 2).mean(axis=0))
    return RegionStats(mean=mean, std=std, pixel_count=int(n))


def decay_from_stats(core: RegionStats, lit: RegionStats) -> DecayParams:
    if np.any(lit.std <= MIN_LIT_STD):
        raise UnidentifiableScaleError(
            f"unidentifiable scale: lit-region std {lit.std} is (near) zero"
        )
    w = core.std / lit.std
    b = core.mean - w * lit.mean
    return DecayParams(w=tuple(w), b=tuple(b))


def estimate_decay(image, mask, cfg: MorphConfig | None = None, min_pixels: int = MIN_REGION_PIXELS) -> DecayParams:
    """Moment-matched ``(w, b)`` between the shadow core and the adjacent lit ring."""
    img = check_image(image)
    m = check_mask(mask, hard=True)
    check_same_hw(img, m, ("image", "mask"))
    core, ring = core_and_ring(m, cfg or MorphConfig())
    return decay_from_stats(
        region_stats(img, core, min_pixels), region_stats(img, ring, min_pixels)
    )


def build_library(pairs, cfg: MorphConfig | None = None, sources=None):
    """Estimate one entry per ``(image, mask)`` pair, skipping failures.

    Returns ``(library, rejected)`` where ``rejected`` lists ``(source, reason)``.
    """
    entries, kept_sources, rejected = [], [], []
    for i, (image, mask) in enumerate(pairs):
        src = sources[i] if sources is not None else f"pair-{i}"
        try:
            params = estimate_decay(image, mask, cfg)
        except ValueError as exc:
            logger.info("rejecting %s: %s", src, exc)
            rejected.append((src, str(exc)))
            continue
        if not params.is_plausible():
            reason = f"implausible estimate w={params.w} b={params.b}"
            logger.info("rejecting %s: %s", src, reason)
            rejected.append((src, reason))
            continue
        entries.append(params)
        kept_sources.append(src)
    return ParamLibrary(entries=entries, sources=kept_sources), rejected


def library_to_dict(library: ParamLibrary) -> dict:
    return {
        "version": library.version,
        "entries": [
            {"w": list(p.w), "b": list(p.b), "source": s}
            for p, s in zip(library.entries, library.sources)
        ],
    }


def library_from_dict(doc) -> ParamLibrary:
    if not isinstance(doc, dict) or "entries" not in doc or "version" not in doc:
        raise LibraryFormatError("library document needs 'version' and 'entries'")
    if doc["version"] != LIBRARY_VERSION:
        raise LibraryFormatError(f"unsupported library version {doc['version']!r}")
    entries, sources = [], []
    for i, item in enumerate(doc["entries"]):
        try:
            w, b = item["w"], item["b"]
            if len(w) != 3 or len(b) != 3:
                raise ValueError("w and b need three components")
            entries.append(DecayParams(w=tuple(float(v) for v in w), b=tuple(float(v) for v in b)))
        except (KeyError, TypeError, ValueError) as exc:
            raise LibraryFormatError(f"entry {i}: {exc}") from exc
        sources.append(str(item.get("source", f"entry-{i}")))
    return ParamLibrary(entries=entries, sources=sources)


def save_library(library: ParamLibrary, path) -> None:
    # json writes floats with repr(), which round-trips doubles exactly
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        json.dump(library_to_dict(library), fh, indent=1)
        fh.write("\n")


def load_library(path) -> ParamLibrary:
    with open(os.fspath(path), encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise LibraryFormatError(f"{path}: {exc}") from exc
    return library_from_dict(doc)


def persist_library(library, path, mode="save"):
    if mode == "save":
        save_library(library, path)
        return None
    if mode == "load":
        return load_library(path)
    raise ValueError(f"mode must be 'save' or 'load', got {mode!r}")


def sample_params(library: ParamLibrary, seed: int) -> DecayParams:
    """Uniformly pick a library entry from one SplitMix64 draw of ``seed``."""
    if len(library) == 0:
        raise ValueError("cannot sample from an empty library")
    return library.entries[uniform_index(seed, len(library))]


def apply_de_exposure(free, soft_mask, params: DecayParams) -> np.ndarray:
    """Blend ``clip(w * free + b)`` into ``free`` with weights ``soft_mask``.

    Pixels where the mask is exactly 0 are returned untouched.
    """
    img = check_image(free, "free")
    m = check_mask(soft_mask, "soft_mask")
    check_same_hw(img, m, ("free", "soft_mask"))
    shadow = clip_unit(img * params.w_array + params.b_array)
    mm = m[:, :, None]
    out = img * (1.0 - mm) + shadow * mm
    return np.where(mm == 0.0, img, out)
