"""Medication relation extraction with frame-based regimen decoding, at desk scale."""

__version__ = "0.1.0"
