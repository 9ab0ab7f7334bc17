"""Forward and backward kernels on ``(N, C, H, W)`` float64 arrays.

Every ``*_forward`` returns ``(out, cache)`` and the matching ``*_backward``
consumes the upstream gradient plus that cache.  Convolution is
cross-correlation with zero padding, as in deep-learning frameworks.
"""

from __future__ import annotations

import numpy as np

from .._validation import ShapeError, check_tensor

BN_EPS = 1e-5


def _pair(v):
    if isinstance(v, (tuple, list)):
        a, b = v
        return int(a), int(b)
    return int(v), int(v)


def conv_output_size(size, k, stride, pad, dilation):
    return (size + 2 * pad - dilation * (k - 1) - 1) // stride + 1


# -- convolution -----------------------------------------------------------


def _im2col(xp, kh, kw, sh, sw, dh, dw, ho, wo):
    n, c = xp.shape[:2]
    cols = np.empty((n, c, kh, kw, ho, wo))
    for i in range(kh):
        for j in range(kw):
            y0, x0 = i * dh, j * dw
            cols[:, :, i, j] = xp[:, :, y0 : y0 + sh * (ho - 1) + 1 : sh, x0 : x0 + sw * (wo - 1) + 1 : sw]
    return cols


def conv2d_forward(x, weight, bias=None, stride=1, padding=0, dilation=1, groups=1):
    """2-D cross-correlation.  ``weight`` has shape ``(C_out, C_in / groups, kH, kW)``."""
    x = check_tensor(x)
    weight = np.asarray(weight, dtype=np.float64)
    n, c, h, w = x.shape
    co, cig, kh, kw = weight.shape
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    dh, dw = _pair(dilation)
    if c % groups or co % groups or cig * groups != c:
        raise ShapeError(
            f"conv2d: input channels {c}, weight {weight.shape}, groups {groups} are inconsistent"
        )
    if bias is not None and np.shape(bias) != (co,):
        raise ShapeError(f"conv2d: bias shape {np.shape(bias)} != ({co},)")
    ho = conv_output_size(h, kh, sh, ph, dh)
    wo = conv_output_size(w, kw, sw, pw, dw)
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d: output would be empty for input {x.shape}")

    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else x
    cols = _im2col(xp, kh, kw, sh, sw, dh, dw, ho, wo)
    g = groups
    cols_g = cols.reshape(n, g, cig, kh, kw, ho, wo)
    w_g = weight.reshape(g, co // g, cig, kh, kw)
    out = np.einsum("ngcijhw,gocij->ngohw", cols_g, w_g, optimize=True).reshape(n, co, ho, wo)
    if bias is not None:
        out = out + np.asarray(bias, dtype=np.float64)[None, :, None, None]
    cache = (x.shape, cols_g, weight, (sh, sw), (ph, pw), (dh, dw), g)
    return out, cache


def conv2d_backward(dout, cache):
    """Gradients ``(dx, dweight, dbias)`` of a ``conv2d_forward`` call."""
    x_shape, cols_g, weight, (sh, sw), (ph, pw), (dh, dw), g = cache
    n, c, h, w = x_shape
    co, cig, kh, kw = weight.shape
    ho, wo = dout.shape[2:]
    d_g = dout.reshape(n, g, co // g, ho, wo)
    w_g = weight.reshape(g, co // g, cig, kh, kw)

    db = dout.sum(axis=(0, 2, 3))
    dw_ = np.einsum("ngohw,ngcijhw->gocij", d_g, cols_g, optimize=True).reshape(weight.shape)
    dcols = np.einsum("ngohw,gocij->ngcijhw", d_g, w_g, optimize=True).reshape(n, c, kh, kw, ho, wo)

    dxp = np.zeros((n, c, h + 2 * ph, w + 2 * pw))
    for i in range(kh):
        for j in range(kw):
            y0, x0 = i * dh, j * dw
            dxp[:, :, y0 : y0 + sh * (ho - 1) + 1 : sh, x0 : x0 + sw * (wo - 1) + 1 : sw] += dcols[:, :, i, j]
    dx = dxp[:, :, ph : ph + h, pw : pw + w]
    return dx, dw_, db


def conv2d(x, weight, bias=None, stride=1, padding=0, dilation=1, groups=1):
    return conv2d_forward(x, weight, bias, stride, padding, dilation, groups)[0]


def strip_conv_dw_forward(x, weight, bias=None):
    """Depthwise ``5x1`` convolution along H with padding ``(2, 0)``."""
    x = check_tensor(x)
    weight = np.asarray(weight, dtype=np.float64)
    c = x.shape[1]
    if weight.shape != (c, 1, 5, 1):
        raise ShapeError(f"strip conv weight must be ({c}, 1, 5, 1), got {weight.shape}")
    return conv2d_forward(x, weight, bias, stride=1, padding=(2, 0), dilation=1, groups=c)


strip_conv_dw_backward = conv2d_backward


def strip_conv_dw(x, weight, bias=None):
    return strip_conv_dw_forward(x, weight, bias)[0]


# -- pooling ---------------------------------------------------------------

POOL_AXES = {"avg_over_W": (3,), "avg_over_H": (2,), "global_avg": (2, 3)}


def pool_forward(x, mode):
    x = check_tensor(x)
    try:
        axes = POOL_AXES[mode]
    except KeyError:
        raise ValueError(f"unknown pool mode {mode!r}") from None
    return x.mean(axis=axes, keepdims=True), (x.shape, axes)


def pool_backward(dout, cache):
    shape, axes = cache
    count = 1
    for a in axes:
        count *= shape[a]
    return np.broadcast_to(dout / count, shape).copy()


def pool(x, mode):
    return pool_forward(x, mode)[0]


# -- pointwise -------------------------------------------------------------


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def h_swish(x):
    return x * np.clip(x + 3.0, 0.0, 6.0) / 6.0


def h_swish_grad(x):
    return np.where(x <= -3.0, 0.0, np.where(x >= 3.0, 1.0, (2.0 * x + 3.0) / 6.0))


def relu(x):
    return np.maximum(x, 0.0)


def batchnorm(x, gamma, beta, running_mean, running_var):
    """Inference-form batch normalization over the channel axis."""
    inv = 1.0 / np.sqrt(np.asarray(running_var) + BN_EPS)
    scale = np.asarray(gamma) * inv
    return (x - np.asarray(running_mean)[None, :, None, None]) * scale[None, :, None, None] + np.asarray(beta)[
        None, :, None, None
    ]


def pointwise_forward(x, mode, bn=None):
    """Apply ``sigmoid``, ``h_swish``, ``relu`` or ``batchnorm`` elementwise.

    ``bn`` is a mapping with ``gamma``, ``beta``, ``running_mean`` and
    ``running_var`` and is only used by the ``batchnorm`` mode.
    """
    x = np.asarray(x, dtype=np.float64)
    if mode == "sigmoid":
        out = sigmoid(x)
        return out, (mode, out)
    if mode == "h_swish":
        return h_swish(x), (mode, x)
    if mode == "relu":
        return relu(x), (mode, x)
    if mode == "batchnorm":
        if bn is None:
            raise ValueError("batchnorm needs per-channel parameters")
        x = check_tensor(x)
        c = x.shape[1]
        for key in ("gamma", "beta", "running_mean", "running_var"):
            if np.shape(bn[key]) != (c,):
                raise ShapeError(f"batchnorm {key} must have shape ({c},)")
        if np.any(np.asarray(bn["running_var"]) <= 0):
            raise ValueError("running variance must be positive")
        inv = 1.0 / np.sqrt(np.asarray(bn["running_var"], dtype=np.float64) + BN_EPS)
        xhat = (x - np.asarray(bn["running_mean"])[None, :, None, None]) * inv[None, :, None, None]
        out = xhat * np.asarray(bn["gamma"])[None, :, None, None] + np.asarray(bn["beta"])[None, :, None, None]
        return out, (mode, (xhat, inv, np.asarray(bn["gamma"], dtype=np.float64)))
    raise ValueError(f"unknown pointwise mode {mode!r}")


def pointwise_backward(dout, cache):
    """Returns ``dx`` or, for batchnorm, ``(dx, dgamma, dbeta)``."""
    mode, saved = cache
    if mode == "sigmoid":
        return dout * saved * (1.0 - saved)
    if mode == "h_swish":
        return dout * h_swish_grad(saved)
    if mode == "relu":
        return dout * (saved > 0)
    xhat, inv, gamma = saved
    dx = dout * (gamma * inv)[None, :, None, None]
    return dx, (dout * xhat).sum(axis=(0, 2, 3)), dout.sum(axis=(0, 2, 3))


def pointwise(x, mode, bn=None):
    return pointwise_forward(x, mode, bn)[0]


# -- bilinear upsampling ---------------------------------------------------


def interp_matrix(size, factor):
    """``(size * factor, size)`` matrix of align-corners-false linear weights."""
    out = size * factor
    src = (np.arange(out) + 0.5) / factor - 0.5
    src = np.maximum(src, 0.0)
    i0 = np.minimum(np.floor(src).astype(np.int64), size - 1)
    i1 = np.minimum(i0 + 1, size - 1)
    lam = src - i0
    m = np.zeros((out, size))
    rows = np.arange(out)
    np.add.at(m, (rows, i0), 1.0 - lam)
    np.add.at(m, (rows, i1), lam)
    return m


def bilinear_upsample_forward(x, factor=2):
    x = check_tensor(x)
    if int(factor) != factor or factor < 2:
        raise ValueError(f"factor must be an integer >= 2, got {factor}")
    uh = interp_matrix(x.shape[2], int(factor))
    uw = interp_matrix(x.shape[3], int(factor))
    out = np.einsum("ph,nchw,qw->ncpq", uh, x, uw, optimize=True)
    return out, (uh, uw)


def bilinear_upsample_backward(dout, cache):
    uh, uw = cache
    return np.einsum("ph,ncpq,qw->nchw", uh, dout, uw, optimize=True)


def bilinear_upsample(x, factor=2):
    return bilinear_upsample_forward(x, factor)[0]
