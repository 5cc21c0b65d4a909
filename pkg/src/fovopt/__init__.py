"""Perceptual quality model and bandwidth-constrained adaptation for FoV refinement."""
__version__ = "0.1.0"
