"""Counter-based deterministic randomness.

Everything random in the package derives from SplitMix64 keyed by
``(seed, counter)`` so results never depend on execution order or worker
count.  The generator is tiny and fully specified here, which keeps outputs
stable across numpy releases.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One SplitMix64 output for the 64-bit state ``x``."""
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Seed for item ``index`` under global ``seed``."""
    return splitmix64((splitmix64(seed & MASK64) + index * GOLDEN_GAMMA) & MASK64)


def uniform_index(seed: int, n: int) -> int:
    """Uniform integer in ``[0, n)`` via multiply-shift on one SplitMix64 draw."""
    if n <= 0:
        raise ValueError("n must be positive")
    return (splitmix64(seed & MASK64) * n) >> 64


def counter_uniform(seed: int, size: int, low=0.0, high=1.0) -> np.ndarray:
    """``size`` doubles uniform in ``[low, high)``; element ``i`` depends only on (seed, i)."""
    with np.errstate(over="ignore"):
        base = np.uint64(splitmix64(seed & MASK64))
        ctr = np.arange(1, size + 1, dtype=np.uint64) * np.uint64(GOLDEN_GAMMA) + base
        z = ctr + np.uint64(GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    # top 53 bits -> [0, 1)
    u = (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
    return low + (high - low) * u
