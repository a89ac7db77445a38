"""warp2: metadata-hiding messaging over a shared encrypted inbox."""

__version__ = "0.1.0"
