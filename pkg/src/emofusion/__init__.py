"""Audio-visual emotion recognition with a dual-branch convolutional network."""

__version__ = "0.1.0"
