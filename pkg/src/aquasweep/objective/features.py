import numpy as np

from .. import gradcore as gc


class FeatureExtractor:
    """Fixed three-stage strided conv pyramid with seeded random filters.

    Each stage is a 3x3 stride-2 convolution followed by tanh. Every filter is
    scaled to unit Frobenius norm, which bounds the Lipschitz constant of the
    whole pyramid. Nothing here is trained.
    """

    def __init__(self, seed=0, channels=(8, 16, 16), in_channels=3, kernel=3):
        rng = np.random.default_rng(seed)
        self.seed = seed
        self.weights = []
        ci = in_channels
        for co in channels:
            w = rng.standard_normal((co, ci, kernel, kernel))
            w /= np.sqrt(np.sum(w * w, axis=(1, 2, 3), keepdims=True))
            self.weights.append(w)
            ci = co

    def __call__(self, image):
        """Feature maps of an H x W x C image, coarsest last."""
        image = gc.as_value(image)
        x = gc.transpose(image, (2, 0, 1)) if image.ndim == 3 else gc.reshape(image, (1,) + image.shape)
        feats = []
        for w in self.weights:
            x = gc.tanh(gc.conv2d(x, w, stride=2))
            feats.append(x)
        return feats
