"""Caption-correction training-data construction pipeline."""

__version__ = "0.1.0"
