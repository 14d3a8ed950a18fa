"""Curvature, Ricci and Szabó operators of affine surfaces and of their
deformed Riemannian extensions, with sampled verification of the
classification results."""

__version__ = "0.1.0"
