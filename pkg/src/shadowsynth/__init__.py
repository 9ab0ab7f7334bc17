"""Physics-guided shadow synthesis, umbra/penumbra mask algebra and deshadowing toolkit."""

from .decay import (
    DecayParams,
    ParamLibrary,
    apply_de_exposure,
    build_library,
    estimate_decay,
    load_library,
    region_stats,
    sample_params,
    save_library,
)
from .image import clip_unit, load_image, load_mask, luminance, rgb_to_lab, save_image, save_mask
from .masks import (
    GuidedFilterConfig,
    MorphConfig,
    core_and_ring,
    guided_filter,
    morph,
    umbra_penumbra_split,
)
from .metrics import delta_a, entropy, psnr, rmse, slr, ssim

__version__ = "0.1.0"

__all__ = [
    "DecayParams",
    "GuidedFilterConfig",
    "MorphConfig",
    "ParamLibrary",
    "apply_de_exposure",
    "build_library",
    "clip_unit",
    "core_and_ring",
    "delta_a",
    "entropy",
    "estimate_decay",
    "guided_filter",
    "load_image",
    "load_library",
    "load_mask",
    "luminance",
    "morph",
    "psnr",
    "region_stats",
    "rgb_to_lab",
    "rmse",
    "sample_params",
    "save_image",
    "save_library",
    "save_mask",
    "slr",
    "ssim",
    "umbra_penumbra_split",
]
