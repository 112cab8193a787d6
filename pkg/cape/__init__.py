"""CAPE - camera-view position embeddings for multi-view 3D detection, at desk scale."""

__version__ = "0.1.0"

__all__ = ["__version__"]
