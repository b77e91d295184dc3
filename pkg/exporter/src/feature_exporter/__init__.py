"""Offline CNN feature exporter for synthct-eval.

Runs an image-classification backbone over every slice of a manifest and
writes the toolkit's FEAT binary (+ id sidecar), so the core never has to
load a neural network to compute FID.
"""

from .export import ExtractorDescriptor, export_features

__all__ = ["ExtractorDescriptor", "export_features"]
