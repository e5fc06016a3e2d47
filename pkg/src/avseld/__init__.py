"""Audio-visual SELD toolkit: spatial augmentation, features, losses, fusion and metrics."""

__version__ = "0.1.0"
