"""Raster representation, PNG I/O, colour conversion and elementary arithmetic.

An image is a float64 array of shape ``(H, W, 3)`` holding RGB in ``[0, 1]``;
a mask is a float64 ``(H, W)`` array in ``[0, 1]``.  All math runs in double
precision and 8-bit quantization only happens when writing PNG files.
"""

from __future__ import annotations

import os

import cv2
import numpy as np

from ._validation import check_image, check_mask

# sRGB / CIELab constants (D65 reference white)
SRGB_THRESHOLD = 0.04045
SRGB_GAMMA = 2.4
D65_WHITE = np.array([0.95047, 1.0, 1.08883])
_SRGB_TO_XYZ_RAW = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
# rows rescaled (by < 2e-7) so RGB = (1, 1, 1) lands exactly on the white point
SRGB_TO_XYZ = _SRGB_TO_XYZ_RAW * (D65_WHITE / _SRGB_TO_XYZ_RAW.sum(axis=1))[:, None]
LAB_DELTA = 6.0 / 29.0

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

MASK_THRESHOLD = 128


class ImageIOError(OSError):
    """A raster file could not be read or written."""


def _read_png(path):
    path = os.fspath(path)
    try:
        buf = np.fromfile(path, dtype=np.uint8)
    except OSError as exc:
        raise ImageIOError(f"cannot read {path}: {exc}") from exc
    if buf.size == 0:
        raise ImageIOError(f"empty file: {path}")
    raw = cv2.imdecode(buf, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageIOError(f"not a decodable image: {path}")
    if raw.dtype == np.uint8:
        peak = 255.0
    elif raw.dtype == np.uint16:
        peak = 65535.0
    else:
        raise ImageIOError(f"unsupported sample type {raw.dtype} in {path}")
    if raw.ndim == 2:
        rgb = np.repeat(raw[:, :, None], 3, axis=2)
    elif raw.ndim == 3 and raw.shape[2] in (3, 4):
        rgb = raw[:, :, 2::-1]  # BGR(A) -> RGB, alpha dropped
    elif raw.ndim == 3 and raw.shape[2] == 1:
        rgb = np.repeat(raw, 3, axis=2)
    else:
        raise ImageIOError(f"unsupported colour type with shape {raw.shape} in {path}")
    if rgb.shape[0] == 0 or rgb.shape[1] == 0:
        raise ImageIOError(f"zero-sized image: {path}")
    return rgb.astype(np.float64) / peak


def quantize8(values) -> np.ndarray:
    """Round-half-up quantization of unit-range values to uint8."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def _write_png(path, array):
    path = os.fspath(path)
    ok, enc = cv2.imencode(".png", array)
    if not ok:
        raise ImageIOError(f"PNG encoding failed for {path}")
    try:
        with open(path, "wb") as fh:
            fh.write(enc.tobytes())
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc


def load_image(path) -> np.ndarray:
    """Load an 8/16-bit gray, RGB or RGBA PNG as an ``(H, W, 3)`` unit-range image."""
    return _read_png(path)


def save_image(path, image) -> None:
    """Write ``image`` as 8-bit RGB PNG (values clipped, round-half-up)."""
    img = check_image(image)
    _write_png(path, quantize8(img)[:, :, ::-1])


def png_io(path, mode="load", image=None):
    """Load or save a PNG; mirrors ``load_image`` / ``save_image``."""
    if mode == "load":
        return load_image(path)
    if mode == "save":
        if image is None:
            raise ValueError("save mode needs an image")
        save_image(path, image)
        return None
    raise ValueError(f"mode must be 'load' or 'save', got {mode!r}")


def load_mask(path, hard=True) -> np.ndarray:
    """Load a mask PNG.  Hard masks threshold the 8-bit level at 128."""
    rgb = _read_png(path)
    gray = rgb.max(axis=2)
    if hard:
        level = np.floor(gray * 255.0 + 0.5)
        return (level >= MASK_THRESHOLD).astype(np.float64)
    return gray


def save_mask(path, mask) -> None:
    """Write ``mask`` as 8-bit grayscale PNG (255 = shadow)."""
    _write_png(path, quantize8(check_mask(mask)))


def clip_unit(image) -> np.ndarray:
    return np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)


def luminance(image) -> np.ndarray:
    """BT.601 luma ``0.299 R + 0.587 G + 0.114 B`` on the stored (gamma-encoded) values."""
    img = check_image(image)
    return img[..., 0] * LUMA_WEIGHTS[0] + img[..., 1] * LUMA_WEIGHTS[1] + img[..., 2] * LUMA_WEIGHTS[2]


def srgb_to_linear(values):
    v = np.asarray(values, dtype=np.float64)
    return np.where(
        v <= SRGB_THRESHOLD, v / 12.92, ((v + 0.055) / 1.055) ** SRGB_GAMMA
    )


def _lab_f(t):
    t = np.asarray(t, dtype=np.float64)
    cube = np.cbrt(t)
    linear = t / (3.0 * LAB_DELTA**2) + 4.0 / 29.0
    return np.where(t > LAB_DELTA**3, cube, linear)


def rgb_to_lab(image) -> np.ndarray:
    """sRGB (D65) to CIELab; returns ``(H, W, 3)`` with L in [0, 100]."""
    img = check_image(image)
    lin = srgb_to_linear(img)
    xyz = lin @ SRGB_TO_XYZ.T
    fx, fy, fz = (_lab_f(xyz[..., i] / D65_WHITE[i]) for i in range(3))
    lab = np.empty_like(img)
    lab[..., 0] = 116.0 * fy - 16.0
    lab[..., 1] = 500.0 * (fx - fy)
    lab[..., 2] = 200.0 * (fy - fz)
    return lab
