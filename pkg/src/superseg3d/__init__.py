"""Zero-shot 3D instance segmentation by growing superpoints from multi-view 2D masks."""

__version__ = "0.1.0"
