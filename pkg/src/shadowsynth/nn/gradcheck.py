"""Directional finite-difference check of analytic gradients."""

from __future__ import annotations

import math

import numpy as np

DEFAULT_STEP = 1e-5
DEFAULT_DIRECTIONS = 8
_TINY = 1e-12


def grad_check(fun, x, seed=0, n_directions=DEFAULT_DIRECTIONS, step=DEFAULT_STEP):
    """Worst relative error between analytic and central-difference directional derivatives.

    ``fun(x)`` must return ``(value, grad)`` with ``grad`` shaped like ``x``.
    Each of ``n_directions`` random unit directions ``d`` compares
    ``<grad, d>`` with ``(f(x + h d) - f(x - h d)) / 2h``.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("grad_check needs a finite input")
    value, grad = fun(x)
    if not math.isfinite(value):
        raise ValueError(f"non-finite forward value {value}")
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != x.shape:
        raise ValueError(f"gradient shape {grad.shape} != input shape {x.shape}")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_directions):
        d = rng.standard_normal(x.shape)
        d /= np.linalg.norm(d)
        xp, xm = x + step * d, x - step * d
        fp, _ = fun(xp)
        fm, _ = fun(xm)
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise ValueError("non-finite forward value during finite differencing")
        numeric = (fp - fm) / (2.0 * step)
        # project onto the perturbation actually realized after rounding x +- h d
        analytic = float(np.sum(grad * (xp - xm))) / (2.0 * step)
        denom = max(abs(numeric), abs(analytic), _TINY)
        worst = max(worst, abs(numeric - analytic) / denom)
    return worst


def module_objective(module, weights, x_transform=None):
    """Scalar objective ``sum(weights * module(x))`` with its input gradient.

    Handy for checking a layer's ``backward`` with :func:`grad_check`.
    """

    def fun(x):
        out = module.forward(x)
        if isinstance(out, tuple):
            out = out[0]
        module.zero_grad()
        dx = module.backward(weights)
        if isinstance(dx, tuple):
            dx = dx[0]
        return float(np.sum(weights * out)), dx

    return fun


def param_objective(module, name, x, weights):
    """Objective as a function of parameter ``name`` (dotted path) at fixed input ``x``."""
    prefix, _, leaf = name.rpartition(".")
    owner = dict(module.named_modules())[prefix + "." if prefix else ""]

    def fun(p):
        saved = owner.params[leaf]
        owner.params[leaf] = p
        try:
            out = module.forward(x)
            if isinstance(out, tuple):
                out = out[0]
            module.zero_grad()
            module.backward(weights)
            g = owner.grads[leaf].copy()
        finally:
            owner.params[leaf] = saved
        return float(np.sum(weights * out)), g

    return fun
