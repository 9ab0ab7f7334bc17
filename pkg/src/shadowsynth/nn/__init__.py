"""Dense ``(N, C, H, W)`` tensor kernels with analytic backward passes."""

from .functional import (
    bilinear_upsample,
    conv2d,
    pointwise,
    pool,
    strip_conv_dw,
)
from .gradcheck import grad_check
from .layers import Activation, BatchNorm2d, Conv2d, Module, Sequential, Upsample
from .serialize import load_params, save_params

__all__ = [
    "Activation",
    "BatchNorm2d",
    "Conv2d",
    "Module",
    "Sequential",
    "Upsample",
    "bilinear_upsample",
    "conv2d",
    "grad_check",
    "load_params",
    "pointwise",
    "pool",
    "save_params",
    "strip_conv_dw",
]
