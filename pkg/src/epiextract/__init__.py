"""Extraction of age, sex, skin lesions and drug names from clinical discharge summaries."""

__version__ = "0.1.0"
