"""Named, seeded toy parameter sets and helpers to set parameters wholesale."""

from __future__ import annotations

import numpy as np

from ..nn.layers import BatchNorm2d, Conv2d, Module
from ..rng import counter_uniform, derive_seed
from .attention import AFF, SDCA
from .pcds import CascadeDecoder, PCDSNet, SemanticAggregation, StreamEncoder
from .scorer import PatchScorer


def zero_params(module: Module) -> Module:
    """Zero every convolution weight and bias; batch norms become the identity."""
    for _, mod in module.named_modules():
        if isinstance(mod, Conv2d):
            for name in mod.params:
                mod.params[name] = np.zeros_like(mod.params[name])
        elif isinstance(mod, BatchNorm2d):
            c = mod.params["gamma"].size
            mod.params.update(gamma=np.ones(c), beta=np.zeros(c), running_mean=np.zeros(c), running_var=np.ones(c))
    return module


def randomize_affine(module: Module, seed: int) -> Module:
    """Give biases and batch-norm statistics seeded non-trivial values."""
    for i, (_, mod) in enumerate(module.named_modules()):
        s = derive_seed(seed, i)
        if isinstance(mod, Conv2d) and mod.has_bias:
            mod.params["bias"] = counter_uniform(s, mod.params["bias"].size, -0.1, 0.1)
        elif isinstance(mod, BatchNorm2d):
            c = mod.params["gamma"].size
            mod.params["gamma"] = counter_uniform(s, c, 0.5, 1.5)
            mod.params["beta"] = counter_uniform(derive_seed(s, 1), c, -0.2, 0.2)
            mod.params["running_mean"] = counter_uniform(derive_seed(s, 2), c, -0.2, 0.2)
            mod.params["running_var"] = counter_uniform(derive_seed(s, 3), c, 0.5, 1.5)
    module.zero_grad()
    return module


FIXTURES = {
    "sdca-c16": lambda seed: SDCA(16, seed=seed),
    "sdca-c64": lambda seed: SDCA(64, seed=seed),
    "aff-c16": lambda seed: AFF(16, seed=seed),
    "sa-c32": lambda seed: SemanticAggregation(32, seed=seed),
    "encoder-umbra": lambda seed: StreamEncoder(4, seed=seed),
    "decoder": lambda seed: CascadeDecoder(seed=seed),
    "pcds": lambda seed: PCDSNet(seed=seed),
    "scorer": lambda seed: PatchScorer(seed=seed),
}


def toy_module(name: str, seed: int = 0) -> Module:
    """Build fixture ``name`` with seeded weights, biases and normalization stats."""
    try:
        factory = FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
    return randomize_affine(factory(seed), derive_seed(seed, 0xB1A5))
