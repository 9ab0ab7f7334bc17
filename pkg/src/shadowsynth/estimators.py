"""scikit-learn compatible wrappers around the functional API.

``X`` is a sequence of ``(H, W, 3)`` images and ``y`` (or ``masks``) the
matching ``(H, W)`` hard masks.  The estimators only hold configuration in
``__init__`` so ``get_params`` / ``set_params`` / ``clone`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_image, check_mask, check_same_hw
from .decay import ParamLibrary, build_library
from .masks import GuidedFilterConfig, MorphConfig, guided_filter, umbra_penumbra_split
from .nets.fixtures import randomize_affine
from .nets.pcds import PCDSNet, TOY_WIDTHS, pcds_forward
from .pipeline import synthesize_triplet
from .rng import derive_seed


def _pairs(X, masks):
    if masks is None:
        raise ValueError("masks are required")
    if len(X) != len(masks):
        raise ValueError(f"got {len(X)} images but {len(masks)} masks")
    out = []
    for img, m in zip(X, masks):
        img = check_image(img)
        m = check_mask(m, hard=True)
        check_same_hw(img, m, ("image", "mask"))
        out.append((img, m))
    return out


class DecayLibraryEstimator(BaseEstimator):
    """Fit a decay-parameter library from real shadow images and their masks.

    Attributes
    ----------
    library_ : ParamLibrary
        Accepted estimates, one per usable pair.
    rejected_ : list of (source, reason)
        Pairs whose estimate failed or was implausible.
    """

    def __init__(self, core_erode_radius=5, ring_gap=3, ring_width=7):
        self.core_erode_radius = core_erode_radius
        self.ring_gap = ring_gap
        self.ring_width = ring_width

    def _morph(self):
        return MorphConfig(self.core_erode_radius, self.ring_gap, self.ring_width)

    def fit(self, X, y=None, sources=None):
        pairs = _pairs(X, y)
        self.library_, self.rejected_ = build_library(pairs, self._morph(), sources)
        self.n_features_in_ = 3
        return self

    def params_array(self):
        """``(n_entries, 2, 3)`` array of ``(w, b)`` rows."""
        check_is_fitted(self, "library_")
        return np.array([[p.w, p.b] for p in self.library_.entries]).reshape(-1, 2, 3)


class MaskSoftener(TransformerMixin, BaseEstimator):
    """Guided-filter softening of hard masks steered by their images."""

    def __init__(self, radius=8, epsilon=1e-3):
        self.radius = radius
        self.epsilon = epsilon

    def fit(self, X=None, y=None):
        self.config_ = GuidedFilterConfig(self.radius, self.epsilon)
        return self

    def transform(self, X, masks=None):
        check_is_fitted(self, "config_")
        return [guided_filter(img, m, self.config_) for img, m in _pairs(X, masks)]


class UmbraPenumbraSplitter(TransformerMixin, BaseEstimator):
    """Transform hard masks into ``(umbra, penumbra)`` pairs."""

    def __init__(self, split_radius=7):
        self.split_radius = split_radius

    def fit(self, X=None, y=None):
        MorphConfig(split_radius=self.split_radius)
        self.fitted_ = True
        return self

    def transform(self, X):
        check_is_fitted(self, "fitted_")
        return [tuple(umbra_penumbra_split(m, self.split_radius)[:2]) for m in X]


class PhysicsShadowSynthesizer(TransformerMixin, BaseEstimator):
    """Synthesize initial shadows from shadow-free images and pseudo masks.

    ``fit`` takes a :class:`ParamLibrary` (or a fitted
    :class:`DecayLibraryEstimator`); ``transform`` returns the shadowed
    images, item ``i`` drawing its parameters with ``derive_seed(seed, i)``.
    """

    def __init__(self, seed=0, gf_radius=8, gf_epsilon=1e-3):
        self.seed = seed
        self.gf_radius = gf_radius
        self.gf_epsilon = gf_epsilon

    def fit(self, library, y=None):
        if isinstance(library, DecayLibraryEstimator):
            check_is_fitted(library, "library_")
            library = library.library_
        if not isinstance(library, ParamLibrary) or len(library) == 0:
            raise ValueError("fit needs a non-empty ParamLibrary")
        self.library_ = library
        return self

    def synthesize(self, X, masks):
        """Full triplets ``(shadowed, soft_mask, params)`` for every pair."""
        check_is_fitted(self, "library_")
        cfg = GuidedFilterConfig(self.gf_radius, self.gf_epsilon)
        return [
            synthesize_triplet(img, m, self.library_, derive_seed(self.seed, i), cfg)
            for i, (img, m) in enumerate(_pairs(X, masks))
        ]

    def transform(self, X, masks=None):
        return [t.shadowed for t in self.synthesize(X, masks)]


class ShadowRemover(BaseEstimator):
    """Two-stream deshadowing network with seeded toy weights.

    ``fit`` only initializes the network (no training happens here); load
    trained weights with ``load_state_dict`` on ``net_``.
    """

    def __init__(self, seed=0, split_radius=7, widths=TOY_WIDTHS):
        self.seed = seed
        self.split_radius = split_radius
        self.widths = widths

    def fit(self, X=None, y=None):
        self.net_ = randomize_affine(PCDSNet(self.widths, seed=self.seed), derive_seed(self.seed, 1))
        return self

    def predict(self, X, masks=None):
        check_is_fitted(self, "net_")
        return [pcds_forward(img, m, self.net_, self.split_radius) for img, m in _pairs(X, masks)]
