"""Dependency-parse annotation adapter for caption corpora."""

__version__ = "0.1.0"
