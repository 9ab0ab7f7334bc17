"""Finite-difference checks for every kernel, block and differentiable loss."""

from __future__ import annotations

import time
from typing import NamedTuple

import numpy as np

from . import losses
from .nn import functional as F
from .nn.gradcheck import grad_check
from .nets.fixtures import toy_module

PRIMITIVE_TOL = 1e-6
BLOCK_TOL = 1e-4
COMPOSITE_TOL = 1e-3
LOSS_TOL = 1e-4


class CheckResult(NamedTuple):
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.error <= self.tolerance


def _weighted(forward, backward, weights):
    def fun(x):
        out, cache = forward(x)
        return float(np.sum(weights * out)), backward(weights, cache)

    return fun


def _away_from_kinks(x, kinks, margin=1e-3):
    x = x.copy()
    for k in kinks:
        near = np.abs(x - k) < margin
        x[near] = k + np.where(x[near] >= k, margin, -margin) * 2
    return x


def primitive_checks(seed=0):
    rng = np.random.default_rng(seed)
    checks = []

    x = rng.standard_normal((2, 4, 7, 6))
    w = rng.standard_normal((6, 2, 3, 3))
    b = rng.standard_normal(6)
    fwd = lambda v: F.conv2d_forward(v, w, b, stride=2, padding=2, dilation=2, groups=2)
    out = fwd(x)[0]
    checks.append(("conv2d/input", _weighted(fwd, lambda d, c: F.conv2d_backward(d, c)[0], rng.standard_normal(out.shape)), x))
    wts = rng.standard_normal(out.shape)
    checks.append(
        ("conv2d/weight", lambda v: (float(np.sum(wts * F.conv2d(x, v, b, 2, 2, 2, 2))),
                                     F.conv2d_backward(wts, F.conv2d_forward(x, v, b, 2, 2, 2, 2)[1])[1]), w)
    )
    checks.append(
        ("conv2d/bias", lambda v: (float(np.sum(wts * F.conv2d(x, w, v, 2, 2, 2, 2))),
                                   F.conv2d_backward(wts, F.conv2d_forward(x, w, v, 2, 2, 2, 2)[1])[2]), b)
    )

    xs = rng.standard_normal((2, 3, 9, 1))
    ws = rng.standard_normal((3, 1, 5, 1))
    fwd = lambda v: F.strip_conv_dw_forward(v, ws, None)
    checks.append(("strip_conv_dw", _weighted(fwd, lambda d, c: F.conv2d_backward(d, c)[0], rng.standard_normal(xs.shape)), xs))

    xp = rng.standard_normal((2, 3, 5, 4))
    for mode in ("avg_over_W", "avg_over_H", "global_avg"):
        fwd = lambda v, m=mode: F.pool_forward(v, m)
        wts_p = rng.standard_normal(fwd(xp)[0].shape)
        checks.append((f"pool/{mode}", _weighted(fwd, F.pool_backward, wts_p), xp))

    xa = rng.uniform(-5, 5, (2, 3, 4, 4))
    for mode, kinks in (("sigmoid", ()), ("h_swish", (-3.0, 3.0)), ("relu", (0.0,))):
        xm = _away_from_kinks(xa, kinks)
        fwd = lambda v, m=mode: F.pointwise_forward(v, m)
        checks.append((f"pointwise/{mode}", _weighted(fwd, F.pointwise_backward, rng.standard_normal(xm.shape)), xm))
    bn = {
        "gamma": rng.uniform(0.5, 1.5, 3),
        "beta": rng.standard_normal(3),
        "running_mean": rng.standard_normal(3),
        "running_var": rng.uniform(0.5, 2.0, 3),
    }
    fwd = lambda v: F.pointwise_forward(v, "batchnorm", bn)
    checks.append(("pointwise/batchnorm", _weighted(fwd, lambda d, c: F.pointwise_backward(d, c)[0], rng.standard_normal(xa.shape)), xa))

    xu = rng.standard_normal((2, 3, 3, 5))
    fwd = lambda v: F.bilinear_upsample_forward(v, 2)
    checks.append(("bilinear_upsample", _weighted(fwd, F.bilinear_upsample_backward, rng.standard_normal((2, 3, 6, 10))), xu))
    return checks


def _module_fun(module, weights, call):
    def fun(x):
        out = call(module, x)
        module.zero_grad()
        g = module.backward(weights)
        return float(np.sum(weights * out)), g

    return fun


def block_checks(seed=0):
    rng = np.random.default_rng(seed + 1)
    checks = []

    sdca = toy_module("sdca-c16", seed)
    x = rng.standard_normal((1, 16, 6, 5))
    checks.append(("sdca", _module_fun(sdca, rng.standard_normal(x.shape), lambda m, v: m.forward(v)[0]), x))

    aff = toy_module("aff-c16", seed)
    fu = rng.standard_normal((1, 16, 4, 4))
    fp = rng.standard_normal((1, 16, 4, 4))
    wa = rng.standard_normal(fu.shape)

    def aff_fun(v):
        out, _ = aff.forward(v, fp)
        aff.zero_grad()
        return float(np.sum(wa * out)), aff.backward(wa)[0]

    def aff_fun_p(v):
        out, _ = aff.forward(fu, v)
        aff.zero_grad()
        return float(np.sum(wa * out)), aff.backward(wa)[1]

    checks.append(("aff/Fu", aff_fun, fu))
    checks.append(("aff/Fp", aff_fun_p, fp))

    sa = toy_module("sa-c32", seed)
    xs = rng.standard_normal((1, 32, 4, 4))
    checks.append(("semantic_aggregation", _module_fun(sa, rng.standard_normal(xs.shape), lambda m, v: m.forward(v)), xs))

    dec = toy_module("decoder", seed)
    shapes = [(1, 128, 1, 1)] + [(1, c, 16 // 2**i, 16 // 2**i) for i, c in enumerate((16, 32, 64, 128), start=1)]
    sizes = [int(np.prod(s)) for s in shapes]
    pyramid = rng.standard_normal(sum(sizes)) * 0.5
    wd = rng.standard_normal((1, 3, 16, 16))

    def dec_fun(v):
        parts = np.split(v, np.cumsum(sizes)[:-1])
        fsem, *fusions = (p.reshape(s) for p, s in zip(parts, shapes))
        out = dec.forward(fsem, fusions)
        dec.zero_grad()
        dsem, dfus = dec.backward(wd)
        grad = np.concatenate([dsem.ravel()] + [g.ravel() for g in dfus])
        return float(np.sum(wd * out)), grad

    checks.append(("cascade_decoder", dec_fun, pyramid))

    enc = toy_module("encoder-umbra", seed)
    xe = rng.uniform(0, 1, (1, 4, 16, 16))
    we = [rng.standard_normal((1, c, 16 // 2**i, 16 // 2**i)) for i, c in enumerate((16, 32, 64, 128), start=1)]

    def enc_fun(v):
        feats = enc.forward(v)
        enc.zero_grad()
        return float(sum(np.sum(a * f) for a, f in zip(we, feats))), enc.backward(we)

    checks.append(("stream_encoder", enc_fun, xe))
    return checks


def composite_checks(seed=0):
    rng = np.random.default_rng(seed + 2)
    net = toy_module("pcds", seed)
    x = rng.uniform(0, 1, (1, 3, 16, 16))
    um = np.zeros((1, 1, 16, 16))
    um[..., 5:11, 5:11] = 1.0
    pm = np.zeros_like(um)
    pm[..., 2:14, 2:14] = 1.0
    pm -= um

    def fun(v):
        out = net.forward(v, um, pm)
        net.zero_grad()
        return float(out.sum()), net.backward(np.ones_like(out))

    return [("pcds_forward", fun, x)]


def loss_checks(seed=0):
    rng = np.random.default_rng(seed + 3)
    target = rng.uniform(0.1, 0.9, (8, 8, 3))
    # keep the restored image away from ties with the target
    restored = np.clip(target + rng.choice([-1, 1], target.shape) * rng.uniform(0.05, 0.2, target.shape), 0.05, 0.95)
    shadow = rng.uniform(0.05, 0.5, (8, 8, 3))
    pen = np.zeros((8, 8))
    pen[2:6, 1:7] = 1.0
    return [
        ("rec_loss/identity", lambda v: losses.rec_loss_grad(v, target), restored),
        ("color_loss", lambda v: losses.color_loss_grad(v, target), restored),
        ("phy_loss", lambda v: losses.phy_loss_grad(shadow, v, pen), restored),
    ]


def run_suite(seed=0, n_directions=8):
    """Run every check; returns a list of :class:`CheckResult`."""
    groups = (
        (primitive_checks, PRIMITIVE_TOL),
        (block_checks, BLOCK_TOL),
        (composite_checks, COMPOSITE_TOL),
        (loss_checks, LOSS_TOL),
    )
    results = []
    for make, tol in groups:
        for name, fun, x in make(seed):
            err = grad_check(fun, x, seed=seed, n_directions=n_directions)
            results.append(CheckResult(name, err, tol))
    return results


def format_results(results, elapsed=None) -> str:
    lines = [f"{r.name:<24} {r.error:.3e}  <= {r.tolerance:.0e}  {'PASS' if r.passed else 'FAIL'}" for r in results]
    if elapsed is not None:
        lines.append(f"elapsed {elapsed:.2f}s")
    return "\n".join(lines)


def timed_suite(seed=0) -> tuple:
    t0 = time.perf_counter()
    results = run_suite(seed)
    return results, time.perf_counter() - t0

