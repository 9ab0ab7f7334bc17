"""Attention, fusion and encoder/decoder blocks built on :mod:`shadowsynth.nn`."""

from .attention import AFF, SDCA, aff_fuse, sdca_forward
from .fixtures import randomize_affine, toy_module, zero_params
from .pcds import (
    CascadeDecoder,
    PCDSNet,
    SemanticAggregation,
    StreamEncoder,
    cascade_decode,
    encoder_forward,
    image_to_tensor,
    mask_to_tensor,
    pcds_forward,
    sa_forward,
    tensor_to_image,
)
from .scorer import PatchScorer, patch_scorer

__all__ = [
    "AFF",
    "SDCA",
    "CascadeDecoder",
    "PCDSNet",
    "PatchScorer",
    "SemanticAggregation",
    "StreamEncoder",
    "aff_fuse",
    "cascade_decode",
    "encoder_forward",
    "image_to_tensor",
    "mask_to_tensor",
    "patch_scorer",
    "pcds_forward",
    "randomize_affine",
    "sa_forward",
    "sdca_forward",
    "tensor_to_image",
    "toy_module",
    "zero_params",
]
